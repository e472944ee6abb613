//! Parses a few instructor comments and prints the validated command and its
//! usage label, or the reason it was rejected.

use draftdesk::command::{classify, parse};

fn main() {
    let comments = [
        "Thanks, looking into it.",
        "#help",
        "#anon\n#reply Explain the difference between a branch and a remote.",
        "#reply #prev 2 292 473",
        "#reply #related 42,44 #anon keep it short",
        "#anon",
        "#help #reply",
        "#reply #prev",
    ];
    for text in comments {
        let shown = text.replace('\n', " ");
        match parse(text) {
            Ok(None) => println!("{shown:?}\n    plain comment"),
            Ok(Some(cmd)) => println!("{shown:?}\n    {:<24} {cmd:?}", classify(&cmd).to_string()),
            Err(e) => println!("{shown:?}\n    rejected: {e}"),
        }
    }
}
