//! Ingests a synthetic archive and the course handouts, then answers a
//! `#help` query with the closest previous posts and material.

use draftdesk::provider::MockProvider;
use draftdesk::replay::synth;
use draftdesk::retrieval::{Category, ChunkConfig, VectorStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mock = MockProvider::new(7, 256);
    let mut store = VectorStore::new(ChunkConfig::default());
    store.ingest(synth::archive(7, 120, 40), &mock)?;
    store.ingest(synth::materials(), &mock)?;
    for cat in [Category::Previous, Category::Related] {
        println!(
            "{cat}: {} items, {} chunks",
            store.category_len(cat),
            store.chunk_count(cat)
        );
    }

    let question = "git push from the terminal fails with no configured push destination";
    println!("\nquery: {question}\n");
    let result = store.help(question, &mock)?;
    print!("{}", result.render(&store));
    Ok(())
}
