use super::{check_batch, ChatProvider, EmbeddingProvider, ProviderError};
use crate::drafting::PromptPackage;
use crate::retrieval::{Category, EmbeddingVector};

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic offline provider.
///
/// Embeddings are hashed bag-of-words counts: every lowercase alphanumeric
/// token adds one to bucket `fnv1a(seed ‖ token) mod dimension`, and the
/// result is L2-normalised. Text without any alphanumeric token hashes as a
/// single token. Chat output is a fixed template that echoes digests of the
/// question and instructions and the ids of the supplied contexts.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    dimension: usize,
}

const FILLER: &str = "Start by reading the error message or requirement carefully, since it \
usually names the exact step that matters. Try the smallest change that could help, run \
your program again, and compare the new output with what you expected before moving on.";

impl MockProvider {
    pub fn new(seed: u64, dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        MockProvider { seed, dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn bucket(&self, token: &str) -> usize {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(token.as_bytes());
        (fnv1a(&bytes) % self.dimension as u64) as usize
    }

    /// Embeds one text.
    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut counts = vec![0f32; self.dimension];
        let mut any = false;
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            counts[self.bucket(&token.to_lowercase())] += 1.0;
            any = true;
        }
        if !any {
            counts[self.bucket(text)] += 1.0;
        }
        EmbeddingVector::normalized(counts).map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}

fn digest(text: &str) -> String {
    format!("{:016x}", fnv1a(text.as_bytes()))
}

fn ids(package: &PromptPackage, category: Category) -> String {
    package
        .context_blocks
        .iter()
        .filter(|b| b.category == category)
        .map(|b| b.item_id.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl EmbeddingProvider for MockProvider {
    fn model(&self) -> &str {
        "mock"
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_batch(texts)?;
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

impl ChatProvider for MockProvider {
    fn model(&self) -> &str {
        "mock"
    }

    fn chat_complete(&self, package: &PromptPackage) -> Result<String, ProviderError> {
        if package.question.trim().is_empty() {
            return Err(ProviderError::Validation("question is empty".into()));
        }
        let opening: Vec<&str> = package.question.split_whitespace().take(12).collect();
        let mut out = format!(
            "Thanks for asking about \"{}\". Here is a suggested answer.\n\n",
            opening.join(" ")
        );
        for block in &package.context_blocks {
            let kind = match block.category {
                Category::Previous => "the earlier forum post",
                Category::Related => "the course material",
            };
            out.push_str(&format!("See {kind} #{} ({}).\n", block.item_id, block.title));
        }
        if !package.instructions.is_empty() {
            out.push_str("This answer follows the instructor's guidance.\n");
        }
        out.push('\n');
        out.push_str(FILLER);
        out.push_str(&format!(
            "\n\n[question {}; previous [{}]; related [{}]; instructions {}]",
            digest(&package.question),
            ids(package, Category::Previous),
            ids(package, Category::Related),
            if package.instructions.is_empty() {
                "none".to_string()
            } else {
                digest(&package.instructions)
            }
        ));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn embeddings_are_pure_and_unit() {
        let m = MockProvider::new(1, 256);
        let a = m.embed_one("Git push fails").unwrap();
        assert_eq!(a, m.embed_one("git PUSH fails!").unwrap());
        assert!((a.norm() - 1.0).abs() <= 1e-6);
        assert!(m.embed_one("!!!").is_ok());
    }

    #[test]
    fn abc_vs_xyz_golden() {
        // Buckets computed independently from the FNV-1a definition; distinct, so cosine is 0.
        let m = MockProvider::new(0, 256);
        let a = m.embed_one("abc").unwrap();
        let b = m.embed_one("xyz").unwrap();
        assert!(a.cosine(&b) < 1.0);
        assert_eq!(a.cosine(&b), 0.0);
        let nz = |v: &EmbeddingVector| v.values().iter().position(|&x| x != 0.0).unwrap();
        assert_eq!((nz(&a), nz(&b)), (BUCKET_ABC, BUCKET_XYZ));
    }

    const BUCKET_ABC: usize = 107;
    const BUCKET_XYZ: usize = 64;

    #[test]
    fn empty_text_rejected() {
        let m = MockProvider::new(1, 8);
        assert!(matches!(
            m.embed_batch(&["ok".into(), " ".into()]),
            Err(ProviderError::Validation(_))
        ));
    }
}
