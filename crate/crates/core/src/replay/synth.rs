//! Synthetic course transcripts with a known composition.
//!
//! Every builder is a pure function of its seed. Alongside the records, a
//! [`Fixture`] carries the counts it was built to produce so tests can check
//! reports against them exactly.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analytics::EDIT_THRESHOLD;
use crate::forum::Role;
use crate::retrieval::corpus::parse_records;
use crate::retrieval::{Category, CorpusItem};
use crate::transcript::{
    to_jsonl, CommentPayload, DecisionPayload, EditPayload, EventRecord, EventType, IngestPayload, RegisterPayload,
    ThreadPayload,
};

pub const INSTRUCTOR: &str = "I1";

const TOPICS: [(&str, &str); 12] = [
    (
        "Git push fails",
        "fatal: No configured push destination when running git push from the terminal",
    ),
    (
        "Maven build error",
        "mvn clean compile reports package does not exist for my imports",
    ),
    (
        "ArrayList ordering",
        "Can we assume venue bookings arrive in date order in the ArrayList",
    ),
    (
        "NullPointerException in constructor",
        "My program crashes with a NullPointerException when the constructor runs",
    ),
    (
        "Tests failing on server",
        "The provided tests pass on my laptop but fail on the marking server",
    ),
    (
        "Interface or abstract class",
        "When should the command classes use an interface instead of an abstract class",
    ),
    (
        "String comparison",
        "Comparing two strings with double equals returns false even when they look identical",
    ),
    (
        "Enum switch",
        "How do I switch on an enum value inside the operator class",
    ),
    (
        "Exception handling",
        "Should we catch the exception in the helper or let it propagate to main",
    ),
    (
        "Submission deadline",
        "Is the assignment submission deadline at midnight or at noon on Friday",
    ),
    (
        "Code style marks",
        "Are marks deducted for long methods or missing javadoc comments",
    ),
    (
        "HashMap iteration order",
        "Iterating over my HashMap prints entries in a different order each run",
    ),
];

const INSTRUCTIONS: [&str; 6] = [
    "Start off by explaining where the possible issue is, then give a hint.",
    "Keep it short and do not give away the solution.",
    "Point them to the relevant lab handout.",
    "Explain the concept with a small example.",
    "Say that this is allowed and explain why.",
    "Ask them to share the full error message.",
];

/// Words that never occur in mock drafts, so appended text cannot align
/// with anything already there.
const APPEND_WORDS: [&str; 12] = [
    "Remember:",
    "revisit",
    "lecture-seven",
    "slides;",
    "plus",
    "tutorial-three",
    "recap.",
    "Kindly",
    "mention",
    "follow-up",
    "queries",
    "below.",
];

/// Course material titles with their approximate word counts.
pub const MATERIALS: [(&str, usize); 12] = [
    ("Assignment 1 handout", 1200),
    ("Assignment 2 handout", 950),
    ("Lab 1: version control", 400),
    ("Lab 2: build tools", 350),
    ("Lab 3: collections", 600),
    ("Lab 4: exceptions", 300),
    ("Lecture notes: object-oriented design", 2500),
    ("Lecture notes: interfaces", 800),
    ("Lecture notes: enums and switch", 250),
    ("Style guide", 500),
    ("Testing guide", 700),
    ("Course outline", 150),
];

const MATERIAL_SENTENCES: [&str; 8] = [
    "Each command class should validate its arguments before changing any state.",
    "Use git to commit early and push your work to the remote repository regularly.",
    "Collections such as ArrayList keep insertion order while HashMap does not promise any order.",
    "Throw a checked exception when the caller can reasonably recover from the failure.",
    "Maven resolves dependencies declared in the project object model file.",
    "Prefer an interface when unrelated classes share behaviour but not implementation.",
    "Compare strings with the equals method rather than the reference equality operator.",
    "Tests run on the marking server use a clean checkout of your repository.",
];

pub const FIRST_MATERIAL_ID: u64 = 1001;

/// Counts a fixture was built to produce.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expected {
    pub labels: BTreeMap<String, usize>,
    pub questions: usize,
    pub answered: usize,
    pub drafts_created: usize,
    pub drafts_discarded: usize,
    pub drafts_pending: usize,
    /// `(additions, removals)` of each published draft, in draft order.
    pub edits: Vec<(usize, usize)>,
}

impl Expected {
    pub fn commands(&self) -> usize {
        self.labels.values().sum()
    }

    pub fn under_threshold(&self) -> usize {
        self.edits.iter().filter(|(a, r)| a + r < EDIT_THRESHOLD).count()
    }

    pub fn fraction_under_threshold(&self) -> f64 {
        if self.edits.is_empty() {
            0.0
        } else {
            self.under_threshold() as f64 / self.edits.len() as f64
        }
    }

    pub fn published_unedited(&self) -> usize {
        self.edits.iter().filter(|(a, r)| a + r == 0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub records: Vec<EventRecord>,
    pub expected: Expected,
}

impl Fixture {
    pub fn transcript(&self) -> String {
        to_jsonl(&self.records)
    }

    pub fn numbered(&self) -> Vec<(usize, EventRecord)> {
        self.records
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, r)| (i + 1, r))
            .collect()
    }
}

/// Composition of a synthetic course.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseShape {
    pub students: usize,
    pub questions: usize,
    /// Questions that end with a published generated answer.
    pub answered: usize,
    /// Answered questions whose first draft was discarded and regenerated.
    pub regenerated: usize,
    /// Questions where the instructor asked for `#help`.
    pub help: usize,
    /// Published drafts with fewer than ten word edits.
    pub under_ten: usize,
    /// Of those, drafts published exactly as generated.
    pub unedited: usize,
    /// Labels of the `#reply` commands; counts must sum to
    /// `answered + regenerated`.
    pub reply_mix: Vec<(String, usize)>,
}

impl Default for CourseShape {
    /// 253 questions, 95 answered through the tool, 60 of the 95 adopted
    /// drafts needing fewer than ten edits.
    fn default() -> Self {
        let mix = [
            ("reply∅ anon", 30),
            ("reply■ anon", 25),
            ("reply∅ anon related", 12),
            ("reply■", 9),
            ("reply∅", 9),
            ("reply∅ prev", 4),
            ("reply∅ anon prev", 4),
            ("reply∅ related prev", 4),
            ("reply■ anon related", 2),
            ("reply■ related prev", 1),
        ];
        CourseShape {
            students: 60,
            questions: 253,
            answered: 95,
            regenerated: 5,
            help: 40,
            under_ten: 60,
            unedited: 20,
            reply_mix: mix.iter().map(|(l, n)| (l.to_string(), *n)).collect(),
        }
    }
}

struct Clock(DateTime<Utc>);

impl Clock {
    fn start() -> Self {
        Clock(Utc.with_ymd_and_hms(2024, 2, 26, 9, 0, 0).unwrap())
    }

    fn tick(&mut self) -> DateTime<Utc> {
        self.0 += Duration::minutes(7);
        self.0
    }
}

/// Previous-year forum archive as corpus-record lines: `total` posts, the
/// first `tool_answered` of a seeded order flagged `answered_via_tool`, and
/// every eleventh post left without an answer.
pub fn archive_jsonl(seed: u64, total: usize, tool_answered: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let mut flagged = vec![false; total];
    for &i in order.iter().take(tool_answered) {
        flagged[i] = true;
    }
    let mut out = String::new();
    for i in 0..total {
        let (title, body) = TOPICS[i % TOPICS.len()];
        let answer = if i % 11 == 10 && !flagged[i] {
            String::new()
        } else {
            format!(
                "Instructor answer {}: {}",
                i + 1,
                MATERIAL_SENTENCES[i % MATERIAL_SENTENCES.len()]
            )
        };
        let mut rec = json!({
            "id": i + 1,
            "category": "previous",
            "title": format!("{title} ({})", 2023 - (i % 2)),
            "body": format!("{body}. Posted in week {}.", 1 + i % 12),
            "source": "archive",
            "answer": answer,
        });
        if flagged[i] {
            rec["answered_via_tool"] = json!(true);
        }
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}

pub fn archive(seed: u64, total: usize, tool_answered: usize) -> Vec<CorpusItem> {
    parse_records(Path::new("archive.jsonl"), &archive_jsonl(seed, total, tool_answered))
        .expect("generated archive parses")
}

/// Course material bodies of the sizes listed in [`MATERIALS`].
pub fn material_text(index: usize) -> String {
    let (title, words) = MATERIALS[index % MATERIALS.len()];
    let mut out = format!("# {title}\n\n");
    let mut n = 0;
    let mut k = index;
    while n < words {
        let s = MATERIAL_SENTENCES[k % MATERIAL_SENTENCES.len()];
        out.push_str(s);
        out.push(' ');
        n += s.split_whitespace().count();
        k += 3;
    }
    out
}

pub fn materials() -> Vec<CorpusItem> {
    MATERIALS
        .iter()
        .enumerate()
        .map(|(i, (title, _))| {
            CorpusItem::new(
                FIRST_MATERIAL_ID + i as u64,
                Category::Related,
                *title,
                material_text(i),
                "handout",
            )
        })
        .collect()
}

fn command_text(label: &str, rng: &mut ChaCha8Rng, previous: u64) -> String {
    let parts: Vec<&str> = label.split(' ').collect();
    let mut segments = Vec::new();
    segments.push(match parts[0] {
        "reply■" => format!("#reply {}", INSTRUCTIONS[rng.random_range(0..INSTRUCTIONS.len())]),
        _ => "#reply".to_string(),
    });
    for p in &parts[1..] {
        segments.push(match *p {
            "anon" => "#anon".to_string(),
            "related" => {
                let n = rng.random_range(1..=2u64);
                let first = FIRST_MATERIAL_ID + rng.random_range(0..MATERIALS.len() as u64 - 1);
                let ids: Vec<String> = (first..first + n).map(|i| i.to_string()).collect();
                format!("#related {}", ids.join(","))
            }
            "prev" => {
                let n = rng.random_range(1..=3u64);
                let first = rng.random_range(1..=previous - n);
                let ids: Vec<String> = (first..first + n).map(|i| i.to_string()).collect();
                let sep = if rng.random_bool(0.5) { " " } else { "," };
                format!("#prev {}", ids.join(sep))
            }
            other => panic!("unknown label part {other}"),
        });
    }
    segments.shuffle(rng);
    segments.join(" ")
}

fn preamble(records: &mut Vec<EventRecord>, clock: &mut Clock, students: usize, seed: u64) -> u64 {
    records.push(
        EventRecord::new(EventType::Register, clock.tick())
            .actor(INSTRUCTOR)
            .payload(RegisterPayload { role: Role::Instructor }),
    );
    for s in 1..=students {
        records.push(
            EventRecord::new(EventType::Register, clock.0)
                .actor(format!("S{s}"))
                .payload(RegisterPayload { role: Role::Student }),
        );
    }
    let previous = archive(seed, 253, 95);
    let count = previous.len() as u64;
    records.push(EventRecord::new(EventType::Ingest, clock.tick()).payload(IngestPayload { items: previous }));
    records.push(EventRecord::new(EventType::Ingest, clock.tick()).payload(IngestPayload { items: materials() }));
    count
}

fn question(records: &mut Vec<EventRecord>, clock: &mut Clock, key: &str, n: usize, student: usize) {
    let (title, body) = TOPICS[n % TOPICS.len()];
    records.push(
        EventRecord::new(EventType::Thread, clock.tick())
            .actor(format!("S{student}"))
            .thread(key)
            .payload(ThreadPayload {
                title: title.to_string(),
                body: format!("{body} (question {})", n + 1),
            }),
    );
}

fn comment(records: &mut Vec<EventRecord>, clock: &mut Clock, key: &str, actor: &str, body: String, anonymous: bool) {
    records.push(
        EventRecord::new(EventType::Comment, clock.tick())
            .actor(actor)
            .thread(key)
            .payload(CommentPayload {
                body,
                anonymous,
                ..CommentPayload::default()
            }),
    );
}

/// Splits `total` word edits into removals and additions, mostly removals.
fn split_edit(total: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let removals = if total >= EDIT_THRESHOLD {
        (total * 4 / 5).min(50)
    } else {
        rng.random_range(0..=total)
    };
    (total - removals, removals)
}

/// A course with the given shape. Drafts are produced by the replaying
/// provider; edits are recorded as "drop the last r words, append a words",
/// which by construction costs exactly `r` removals and `a` additions.
pub fn course(seed: u64, shape: &CourseShape) -> Fixture {
    let replies: usize = shape.reply_mix.iter().map(|(_, n)| n).sum();
    assert_eq!(
        replies,
        shape.answered + shape.regenerated,
        "reply mix must cover every draft"
    );
    assert!(shape.answered <= shape.questions && shape.help <= shape.questions);
    assert!(shape.under_ten <= shape.answered && shape.unedited <= shape.under_ten);
    assert!(shape.regenerated <= shape.answered);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = Clock::start();
    let mut records = Vec::new();
    let previous = preamble(&mut records, &mut clock, shape.students, seed);

    let mut order: Vec<usize> = (0..shape.questions).collect();
    order.shuffle(&mut rng);
    let answered: Vec<usize> = order[..shape.answered].to_vec();
    order.shuffle(&mut rng);
    let helped: Vec<usize> = order[..shape.help].to_vec();

    let mut labels: Vec<String> = shape
        .reply_mix
        .iter()
        .flat_map(|(l, n)| std::iter::repeat_n(l.clone(), *n))
        .collect();
    labels.shuffle(&mut rng);
    let mut labels = labels.into_iter();

    let mut totals: Vec<usize> = (0..shape.answered)
        .map(|i| match i {
            i if i < shape.unedited => 0,
            i if i < shape.under_ten => rng.random_range(1..EDIT_THRESHOLD),
            _ => rng.random_range(EDIT_THRESHOLD..=70),
        })
        .collect();
    totals.shuffle(&mut rng);
    let mut totals = totals.into_iter();

    let mut expected = Expected {
        questions: shape.questions,
        answered: shape.answered,
        drafts_created: replies,
        drafts_discarded: shape.regenerated,
        ..Expected::default()
    };
    let mut regenerate_left = shape.regenerated;

    for n in 0..shape.questions {
        let key = format!("q{}", n + 1);
        let student = 1 + rng.random_range(0..shape.students);
        question(&mut records, &mut clock, &key, n, student);
        if rng.random_bool(0.1) {
            let text = "Any update on this? #reply please".to_string();
            comment(&mut records, &mut clock, &key, &format!("S{student}"), text, false);
        }
        if helped.contains(&n) {
            comment(&mut records, &mut clock, &key, INSTRUCTOR, "#help".into(), false);
            *expected.labels.entry("help".into()).or_default() += 1;
        }
        if !answered.contains(&n) {
            continue;
        }
        if regenerate_left > 0 {
            regenerate_left -= 1;
            let label = labels.next().expect("enough labels");
            comment(
                &mut records,
                &mut clock,
                &key,
                INSTRUCTOR,
                command_text(&label, &mut rng, previous),
                false,
            );
            *expected.labels.entry(label).or_default() += 1;
            records.push(EventRecord::new(EventType::Discard, clock.tick()).thread(&key));
        }
        let label = labels.next().expect("enough labels");
        comment(
            &mut records,
            &mut clock,
            &key,
            INSTRUCTOR,
            command_text(&label, &mut rng, previous),
            false,
        );
        *expected.labels.entry(label).or_default() += 1;

        let total = totals.next().expect("one total per answer");
        let (additions, removals) = split_edit(total, &mut rng);
        if total > 0 {
            let words: Vec<&str> = (0..additions)
                .map(|i| APPEND_WORDS[(n + i) % APPEND_WORDS.len()])
                .collect();
            let first_cut = if removals > 1 && rng.random_bool(0.5) {
                removals / 2
            } else {
                0
            };
            if first_cut > 0 {
                records.push(
                    EventRecord::new(EventType::Edit, clock.tick())
                        .actor(INSTRUCTOR)
                        .thread(&key)
                        .payload(EditPayload {
                            remove_last: Some(first_cut),
                            ..EditPayload::default()
                        }),
                );
            }
            records.push(
                EventRecord::new(EventType::Edit, clock.tick())
                    .actor(INSTRUCTOR)
                    .thread(&key)
                    .payload(EditPayload {
                        remove_last: Some(removals - first_cut),
                        append: (!words.is_empty()).then(|| words.join(" ")),
                        ..EditPayload::default()
                    }),
            );
        }
        records.push(
            EventRecord::new(EventType::Publish, clock.tick())
                .actor(INSTRUCTOR)
                .thread(&key)
                .payload(DecisionPayload::default()),
        );
        expected.edits.push((additions, removals));
        if rng.random_bool(0.3) {
            comment(
                &mut records,
                &mut clock,
                &key,
                &format!("S{student}"),
                "Thanks, that fixed it!".into(),
                true,
            );
        }
    }
    Fixture { records, expected }
}

/// A full-term course with the default shape.
pub fn full_course(seed: u64) -> Fixture {
    course(seed, &CourseShape::default())
}

/// Command counts whose shares print as 34%, 21%, 18%, 8%, 6%, 6%, 2%, 2%,
/// 2%, 1% and < 1%.
pub const REFERENCE_MIX: [(&str, usize); 11] = [
    ("help", 68),
    ("reply∅ anon", 42),
    ("reply■ anon", 36),
    ("reply∅ anon related", 16),
    ("reply■", 12),
    ("reply∅", 12),
    ("reply∅ prev", 4),
    ("reply∅ anon prev", 4),
    ("reply∅ related prev", 4),
    ("reply■ anon related", 2),
    ("reply■ related prev", 1),
];

/// One thread per command, in [`REFERENCE_MIX`] proportions; drafts are
/// generated and left pending.
pub fn reference_usage_mix() -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(281);
    let mut clock = Clock::start();
    let mut records = Vec::new();
    let previous = preamble(&mut records, &mut clock, 20, 281);
    let mut labels: Vec<&str> = REFERENCE_MIX
        .iter()
        .flat_map(|(l, n)| std::iter::repeat_n(*l, *n))
        .collect();
    labels.shuffle(&mut rng);
    let mut expected = Expected::default();
    for (n, label) in labels.iter().enumerate() {
        let key = format!("t{}", n + 1);
        question(&mut records, &mut clock, &key, n, 1 + n % 20);
        let text = if *label == "help" {
            "#help".to_string()
        } else {
            expected.drafts_created += 1;
            expected.drafts_pending += 1;
            command_text(label, &mut rng, previous)
        };
        comment(&mut records, &mut clock, &key, INSTRUCTOR, text, false);
        *expected.labels.entry(label.to_string()).or_default() += 1;
    }
    expected.questions = labels.len();
    Fixture { records, expected }
}
