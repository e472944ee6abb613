//! Test-only oracles and generators shared by the integration suites.
#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use draftdesk::command::{self, ValidatedCommand};
use draftdesk::desk::{Action, Desk, DeskConfig};
use draftdesk::drafting::DraftStatus;
use draftdesk::forum::{PostKind, ThreadId, UserId, UserRef, Visibility};
use draftdesk::provider::MockProvider;
use draftdesk::retrieval::{Category, ContextMatch, CorpusItem, ItemId, VectorStore};

pub fn t(s: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_720_000_000 + s, 0).unwrap()
}

/// Textbook O(nm) longest-common-subsequence table over whitespace tokens.
/// Returns `(additions, removals)`.
pub fn lcs_oracle(a: &str, b: &str) -> (usize, usize) {
    let x: Vec<&str> = a.split_whitespace().collect();
    let y: Vec<&str> = b.split_whitespace().collect();
    let mut dp = vec![vec![0usize; y.len() + 1]; x.len() + 1];
    for i in 1..=x.len() {
        for j in 1..=y.len() {
            dp[i][j] = if x[i - 1] == y[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    let l = dp[x.len()][y.len()];
    (y.len() - l, x.len() - l)
}

/// Exhaustive ranking over independently re-embedded chunk texts: every
/// chunk is scored against the query, each item keeps its best chunk, and
/// items sort by score then id.
pub struct BruteIndex {
    items: Vec<(ItemId, Category, Vec<Vec<f32>>)>,
}

impl BruteIndex {
    pub fn build(store: &VectorStore, mock: &MockProvider) -> Self {
        let items = store
            .items()
            .map(|i| {
                let vectors = store
                    .chunks(i.item_id)
                    .iter()
                    .map(|c| mock.embed_one(&c.chunk.text).unwrap().values().to_vec())
                    .collect();
                (i.item_id, i.category, vectors)
            })
            .collect();
        BruteIndex { items }
    }

    pub fn top_k(&self, mock: &MockProvider, query: &str, category: Category, k: usize) -> Vec<(ItemId, f32)> {
        let q = mock.embed_one(query).unwrap();
        let mut scored: Vec<(ItemId, f32)> = self
            .items
            .iter()
            .filter(|(_, c, _)| *c == category)
            .map(|(id, _, vectors)| {
                let best = vectors
                    .iter()
                    .map(|v| {
                        let mut dot = 0f32;
                        for (a, b) in v.iter().zip(q.values()) {
                            dot += a * b;
                        }
                        dot
                    })
                    .fold(f32::NEG_INFINITY, f32::max);
                (*id, best)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0 .0.cmp(&b.0 .0)));
        scored.truncate(k);
        scored
    }
}

pub fn as_pairs(matches: &[ContextMatch]) -> Vec<(ItemId, f32)> {
    matches.iter().map(|m| (m.item_id, m.score)).collect()
}

pub const VOCAB: [&str; 40] = [
    "git",
    "push",
    "remote",
    "branch",
    "merge",
    "java",
    "class",
    "interface",
    "enum",
    "switch",
    "array",
    "list",
    "map",
    "order",
    "booking",
    "venue",
    "test",
    "server",
    "maven",
    "build",
    "error",
    "null",
    "pointer",
    "constructor",
    "string",
    "equals",
    "loop",
    "index",
    "bound",
    "exception",
    "catch",
    "throw",
    "deadline",
    "marks",
    "style",
    "javadoc",
    "method",
    "field",
    "static",
    "lecture",
];

pub fn random_words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `previous` + `related` items with ids 1.. and bodies of 1 to `max_words` words.
pub fn random_corpus(rng: &mut ChaCha8Rng, previous: usize, related: usize, max_words: usize) -> Vec<CorpusItem> {
    (0..previous + related)
        .map(|i| {
            let cat = if i < previous {
                Category::Previous
            } else {
                Category::Related
            };
            let n = rng.random_range(1..=max_words);
            CorpusItem::new(
                i as u64 + 1,
                cat,
                format!("item {}", i + 1),
                random_words(rng, n),
                "synthetic",
            )
        })
        .collect()
}

/// Random forum activity: questions, student chatter (optionally anonymous),
/// `#help` and `#reply` commands, drafts, edits, anonymous and named
/// publication, and discards.
pub fn random_desk(rng: &mut ChaCha8Rng, mock: &MockProvider, threads: usize) -> Desk {
    let mut desk = Desk::new(DeskConfig::default(), VectorStore::default());
    let corpus = vec![
        CorpusItem::new(1, Category::Previous, "old post", "git push remote branch", "archive"),
        CorpusItem::new(2, Category::Previous, "older post", "java enum switch", "archive"),
        CorpusItem::new(42, Category::Related, "lab", "array list order booking", "handout"),
        CorpusItem::new(44, Category::Related, "guide", "exception catch throw", "handout"),
    ];
    desk.ingest(corpus, mock).unwrap();
    let students: Vec<UserId> = (1..=6).map(|i| UserId::new(format!("S{i}"))).collect();
    let instructors: Vec<UserId> = (1..=2).map(|i| UserId::new(format!("I{i}"))).collect();
    for s in &students {
        desk.forum_mut()
            .register_user(UserRef {
                user_id: s.clone(),
                role: draftdesk::forum::Role::Student,
            })
            .unwrap();
    }
    for i in &instructors {
        desk.forum_mut()
            .register_user(UserRef {
                user_id: i.clone(),
                role: draftdesk::forum::Role::Instructor,
            })
            .unwrap();
    }
    let commands = [
        "#help",
        "#reply",
        "#anon #reply",
        "#reply keep it short #anon",
        "#reply #related 42,44 #anon",
        "#reply #prev 1 2",
        "#reply explain #prev 2 #related 44",
    ];
    let mut clock = 0;
    for _ in 0..threads {
        clock += 10;
        let author = students.choose(rng).unwrap();
        let title = random_words(rng, 3);
        let body = random_words(rng, 8);
        let th = desk
            .forum_mut()
            .create_thread(author, &title, &body, t(clock))
            .unwrap()
            .thread_id;
        for _ in 0..rng.random_range(0..12) {
            clock += 1;
            match rng.random_range(0..10) {
                0..=2 => {
                    let s = students.choose(rng).unwrap();
                    let text = random_words(rng, 5);
                    desk.submit_comment(th, s, &text, rng.random_bool(0.5), t(clock))
                        .unwrap();
                }
                3 => {
                    let i = instructors.choose(rng).unwrap();
                    let text = random_words(rng, 5);
                    desk.submit_comment(th, i, &text, rng.random_bool(0.3), t(clock))
                        .unwrap();
                }
                4..=6 => {
                    let i = instructors.choose(rng).unwrap();
                    let text = *commands.choose(rng).unwrap();
                    let sub = desk.submit_comment(th, i, text, false, t(clock)).unwrap();
                    match sub.action {
                        Action::Help => {
                            desk.run_help(th, sub.comment.comment_id, mock).unwrap();
                        }
                        Action::Reply(plan) => {
                            desk.generate_draft(&plan, mock, t(clock)).unwrap();
                        }
                        Action::None => unreachable!("commands always act"),
                    }
                }
                7 => {
                    if let Some(id) = desk.latest_open_draft(th).map(|d| d.draft_id) {
                        let text = random_words(rng, 6);
                        desk.edit_draft(id, &text, t(clock)).unwrap();
                    }
                }
                8 => {
                    if let Some(id) = desk.latest_open_draft(th).map(|d| d.draft_id) {
                        let i = instructors.choose(rng).unwrap();
                        desk.publish(id, i, rng.random_bool(0.6), t(clock)).unwrap();
                    }
                }
                _ => {
                    if let Some(id) = desk.latest_open_draft(th).map(|d| d.draft_id) {
                        desk.discard(id).unwrap();
                    }
                }
            }
        }
    }
    desk
}

/// Problems with a student-view serialisation of `thread`; empty when clean.
pub fn audit_student_view(desk: &Desk, thread: ThreadId, viewer: &UserRef) -> Vec<String> {
    let view = desk.forum().render_view(thread, viewer).unwrap();
    let json: Value = serde_json::to_value(&view).unwrap();
    let mut problems = Vec::new();
    let real = desk.forum().thread(thread).unwrap();
    let entries = std::iter::once(&json["question"]).chain(json["comments"].as_array().unwrap().iter());
    for e in entries {
        let kind = e["kind"].as_str().unwrap();
        if kind == "command" || kind == "draft" {
            problems.push(format!("{kind} entry visible"));
        }
        if e["visibility"] == "instructor_only" {
            problems.push("instructor_only entry visible".into());
        }
        let body = e["body"].as_str().unwrap();
        if matches!(command::parse(body), Ok(Some(_))) && kind != "student_message" {
            problems.push(format!("hashtag command visible: {body}"));
        }
        let name = e["display_name"].as_str().unwrap();
        if name.starts_with("Anonymous ") {
            if e.get("user_id").is_some() {
                problems.push(format!("aliased entry exposes user_id: {e}"));
            }
            // the true author must not leak through any other field
            if let Some(id) = e.get("comment_id").and_then(Value::as_u64) {
                let c = real.comments.iter().find(|c| c.comment_id.0 == id).unwrap();
                let text = e.to_string();
                if text.contains(&format!("\"{}\"", c.author.user_id.as_str())) {
                    problems.push(format!("aliased entry names its author: {e}"));
                }
            }
        }
    }
    for c in &real.comments {
        let hidden =
            c.visibility == Visibility::InstructorOnly || matches!(c.kind, PostKind::Command | PostKind::Draft);
        let shown = view.comments.iter().any(|e| e.comment_id == Some(c.comment_id));
        if hidden == shown {
            problems.push(format!("comment {} hidden={hidden} shown={shown}", c.comment_id.0));
        }
    }
    problems
}

/// Reference model of the draft lifecycle.
pub fn allowed(status: DraftStatus, op: &str) -> bool {
    matches!(status, DraftStatus::Pending | DraftStatus::Edited) && matches!(op, "edit" | "publish" | "discard")
}

pub fn random_command(rng: &mut ChaCha8Rng) -> ValidatedCommand {
    if rng.random_bool(0.15) {
        return ValidatedCommand::Help;
    }
    let ids = |rng: &mut ChaCha8Rng| -> Vec<ItemId> {
        if rng.random_bool(0.5) {
            Vec::new()
        } else {
            (0..rng.random_range(1..4))
                .map(|_| ItemId(rng.random_range(1..100_000)))
                .collect()
        }
    };
    let instructions = if rng.random_bool(0.5) {
        String::new()
    } else {
        let n = rng.random_range(1..12);
        let mut s = random_words(rng, n);
        if rng.random_bool(0.3) {
            s.push_str("\n\nThe main branch is called \"main\". ünïcödé 42");
        }
        s
    };
    ValidatedCommand::Reply {
        instructions,
        prev: ids(rng),
        related: ids(rng),
        anon: rng.random_bool(0.5),
    }
}
