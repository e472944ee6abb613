//! Word-level diff between a generated draft and the text an instructor
//! published, with the addition and removal counts used in the edit report.

use draftdesk::analytics::{diff_edits, word_diff, WordTag};

fn main() {
    let generated = "Run git pull to fetch the remote changes and then push again";
    let published = "Run git pull --rebase to replay your commits on the remote changes and then push";
    for op in word_diff(generated, published) {
        let mark = match op.tag {
            WordTag::Equal => ' ',
            WordTag::Insert => '+',
            WordTag::Delete => '-',
        };
        println!("{mark} {}", op.words.join(" "));
    }
    let m = diff_edits(generated, published);
    println!(
        "\nadditions {} removals {} total {}",
        m.additions,
        m.removals,
        m.total()
    );
}
