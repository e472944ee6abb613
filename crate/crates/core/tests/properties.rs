//! Property tests for the library's invariants.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use draftdesk::analytics::{diff_edits, usage_report, word_diff, WordTag};
use draftdesk::command::{classify, parse, ValidatedCommand};
use draftdesk::drafting::{Draft, DraftId, DraftStatus, Provenance, PublishRecord};
use draftdesk::forum::{CommentId, Forum, ForumConfig, ThreadId, UserId, UserRef};
use draftdesk::provider::MockProvider;
use draftdesk::replay::synth::{self, CourseShape};
use draftdesk::replay::{replay_records, ReplayOptions};
use draftdesk::retrieval::{Category, ChunkConfig, VectorStore};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn hashtag_soup() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("#reply".to_string()),
        Just("#help".to_string()),
        Just("#anon".to_string()),
        Just("#prev".to_string()),
        Just("#related".to_string()),
        Just("#REPLY".to_string()),
        Just("#".to_string()),
        Just(",".to_string()),
        "[0-9]{1,6}",
        "[a-z]{1,8}",
        "\\PC{0,6}",
        Just("\n".to_string()),
    ];
    prop::collection::vec(piece, 0..12).prop_map(|v| v.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parser_never_panics(text in "\\PC*") {
        let _ = parse(&text);
    }

    #[test]
    fn parser_never_panics_on_hashtag_soup(text in hashtag_soup()) {
        if let Ok(Some(cmd)) = parse(&text) {
            // anything accepted has a canonical form that parses back to itself
            prop_assert_eq!(parse(&cmd.to_string()), Ok(Some(cmd.clone())));
        }
    }

    #[test]
    fn canonical_text_round_trips(seed in any::<u64>()) {
        let cmd = random_command(&mut rng(seed));
        let text = cmd.to_string();
        prop_assert_eq!(parse(&text), Ok(Some(cmd)));
    }

    #[test]
    fn label_ignores_hashtag_order(seed in any::<u64>(), instructions in prop::option::of("[a-z]{1,8}( [a-z]{1,8}){0,4}")) {
        let mut r = rng(seed);
        let mut segments = vec![match &instructions {
            Some(i) => format!("#reply {i}"),
            None => "#reply".to_string(),
        }];
        if r.random_bool(0.5) {
            segments.push("#anon".into());
        }
        if r.random_bool(0.5) {
            segments.push(format!("#prev {} {}", r.random_range(1..500), r.random_range(500..1000)));
        }
        if r.random_bool(0.5) {
            segments.push(format!("#related {},{}", r.random_range(1..50), r.random_range(50..99)));
        }
        let reference = parse(&segments.join(" ")).unwrap().unwrap();
        for _ in 0..4 {
            segments.shuffle(&mut r);
            let cmd = parse(&segments.join("\n")).unwrap().unwrap();
            prop_assert_eq!(classify(&cmd), classify(&reference));
            if let (ValidatedCommand::Reply { prev: a, related: b, anon: c, .. }, ValidatedCommand::Reply { prev: x, related: y, anon: z, .. }) = (&cmd, &reference) {
                prop_assert_eq!((a, b, c), (x, y, z));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn students_never_see_hidden_entries_or_true_authors(seed in any::<u64>()) {
        let mock = MockProvider::new(seed, 32);
        let desk = random_desk(&mut rng(seed), &mock, 6);
        let viewers = [UserRef::student("S1"), UserRef::student("S4"), UserRef::student("nobody")];
        for th in desk.forum().threads() {
            for v in &viewers {
                let problems = audit_student_view(&desk, th.thread_id, v);
                prop_assert!(problems.is_empty(), "{:?}", problems);
            }
            // instructors see everything
            let full = desk.forum().render_view(th.thread_id, &UserRef::instructor("I1")).unwrap();
            prop_assert_eq!(full.comments.len(), th.comments.len());
        }
    }

    #[test]
    fn desk_serde_round_trip_keeps_comment_order(seed in any::<u64>()) {
        let mock = MockProvider::new(seed, 32);
        let desk = random_desk(&mut rng(seed), &mock, 5);
        let json = serde_json::to_string(&desk).unwrap();
        let back: draftdesk::Desk = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.forum(), desk.forum());
        prop_assert_eq!(back.drafts().collect::<Vec<_>>(), desk.drafts().collect::<Vec<_>>());
        for th in back.forum().threads() {
            for pair in th.comments.windows(2) {
                prop_assert!(pair[0].seq < pair[1].seq);
                prop_assert!(pair[0].created_at <= pair[1].created_at);
            }
        }
    }

    #[test]
    fn aliases_are_stable_and_distinct(seed in any::<u64>(), alias_seed in any::<u64>(), users in 1usize..30) {
        let config = ForumConfig { alias_seed, ..ForumConfig::default() };
        let mut a = Forum::new(config.clone());
        let mut b = Forum::new(config);
        let ids: Vec<UserId> = (0..users).map(|i| UserId::new(format!("S{i}"))).collect();
        for f in [&mut a, &mut b] {
            for id in &ids {
                f.register_user(UserRef { user_id: id.clone(), role: draftdesk::forum::Role::Student }).unwrap();
            }
            f.create_thread(&ids[0], "t", "q", t(0)).unwrap();
            f.create_thread(&ids[0], "t", "q", t(1)).unwrap();
        }
        let mut r = rng(seed);
        let mut seen = std::collections::BTreeMap::new();
        for _ in 0..60 {
            let th = ThreadId(r.random_range(1..=2));
            let id = &ids[r.random_range(0..users)];
            let x = a.assign_alias(th, id).unwrap();
            let y = b.assign_alias(th, id).unwrap();
            prop_assert_eq!(&x, &y);
            let label = seen.entry((th, id.clone())).or_insert_with(|| x.label.clone());
            prop_assert_eq!(&*label, &x.label);
        }
        for th in [ThreadId(1), ThreadId(2)] {
            let labels: Vec<&String> = seen.iter().filter(|((t, _), _)| *t == th).map(|(_, l)| l).collect();
            let unique: std::collections::BTreeSet<_> = labels.iter().collect();
            prop_assert_eq!(unique.len(), labels.len());
        }
    }

    #[test]
    fn usage_total_equals_command_count(seed in any::<u64>()) {
        let mock = MockProvider::new(seed, 32);
        let desk = random_desk(&mut rng(seed), &mock, 6);
        let report = desk.usage_report();
        prop_assert_eq!(report.total, desk.usage_events().len());
        prop_assert_eq!(report.rows.iter().map(|r| r.count).sum::<usize>(), report.total);
        let reparsed: Vec<ValidatedCommand> = desk.usage_events().iter().map(|e| e.command.clone()).collect();
        prop_assert_eq!(usage_report(&reparsed), report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn draft_lifecycle_follows_the_state_machine(ops in prop::collection::vec(0usize..4, 1..16)) {
        let mut d = Draft::new(
            DraftId(1),
            ThreadId(1),
            CommentId(1),
            "generated text".into(),
            Provenance {
                combination_label: "reply∅".into(),
                context_ids: vec![],
                model: "mock".into(),
                command_comment: CommentId(1),
            },
            t(0),
        );
        for (step, op) in ops.into_iter().enumerate() {
            let before = d.clone();
            let (name, result) = match op {
                0 => ("edit", d.edit(&format!("edit {step}"), t(step as i64)).map(|_| ())),
                1 => {
                    let same = d.current_text.clone();
                    ("edit", d.edit(&same, t(step as i64)).map(|_| ()))
                }
                2 => {
                    let metrics = diff_edits(d.generated_text(), &d.current_text);
                    let record = PublishRecord { comment_id: CommentId(2), anonymous: false, published_at: t(step as i64) };
                    ("publish", d.mark_published(record, metrics))
                }
                _ => ("discard", d.discard()),
            };
            prop_assert_eq!(result.is_ok(), allowed(before.status, name));
            if result.is_err() {
                prop_assert_eq!(&d, &before);
            }
            prop_assert_eq!(d.generated_text(), "generated text");
            prop_assert_eq!(d.publish.is_some(), d.status == DraftStatus::Published);
            if d.status == DraftStatus::Edited {
                prop_assert!(!d.revisions.is_empty());
            }
        }
    }

    #[test]
    fn diff_matches_lcs_oracle(a in prop::collection::vec(0usize..8, 0..40), b in prop::collection::vec(0usize..8, 0..40)) {
        let x = a.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>().join(" ");
        let y = b.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>().join(" ");
        let m = diff_edits(&x, &y);
        prop_assert_eq!((m.additions, m.removals), lcs_oracle(&x, &y));
        // the word diff replays the original into the final text
        let ops = word_diff(&x, &y);
        let rebuilt: Vec<&str> = ops.iter().filter(|o| o.tag != WordTag::Delete).flat_map(|o| o.words.iter().map(String::as_str)).collect();
        prop_assert_eq!(rebuilt.join(" "), y.split_whitespace().collect::<Vec<_>>().join(" "));
    }

    #[test]
    fn diff_boundaries(text in "[a-z]{1,6}( [a-z]{1,6}){0,30}") {
        let n = text.split_whitespace().count();
        let add = diff_edits("", &text);
        prop_assert_eq!((add.additions, add.removals), (n, 0));
        let rem = diff_edits(&text, "");
        prop_assert_eq!((rem.additions, rem.removals), (0, n));
        prop_assert_eq!(diff_edits(&text, &text).total(), 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn top_k_matches_brute_force(seed in any::<u64>(), k in 1usize..8, max_tokens in 4usize..40) {
        let mut r = rng(seed);
        let mock = MockProvider::new(seed, 48);
        let chunking = ChunkConfig { max_tokens, overlap_tokens: max_tokens / 4 };
        let mut store = VectorStore::new(chunking);
        store.ingest(random_corpus(&mut r, 12, 12, 60), &mock).unwrap();
        for c in [Category::Previous, Category::Related] {
            for item in store.items().filter(|i| i.category == c) {
                for chunk in store.chunks(item.item_id) {
                    prop_assert!((chunk.vector.norm() - 1.0).abs() < 1e-4);
                }
            }
        }
        let oracle = BruteIndex::build(&store, &mock);
        for _ in 0..5 {
            let n = r.random_range(1..10);
            let q = random_words(&mut r, n);
            for c in [Category::Previous, Category::Related] {
                let got = as_pairs(&store.top_k(&q, c, k, &mock).unwrap());
                prop_assert_eq!(got, oracle.top_k(&mock, &q, c, k));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn replay_is_deterministic(seed in 0u64..1000) {
        let shape = CourseShape {
            students: 6,
            questions: 20,
            answered: 10,
            regenerated: 1,
            help: 4,
            under_ten: 6,
            unedited: 2,
            reply_mix: vec![("reply∅ anon".into(), 6), ("reply■".into(), 3), ("reply∅ prev".into(), 2)],
        };
        let fixture = synth::course(seed, &shape);
        let options = ReplayOptions::with_seed(seed);
        let (desk_a, a) = replay_records(&fixture.numbered(), &options).unwrap();
        let (desk_b, b) = replay_records(&fixture.numbered(), &options).unwrap();
        prop_assert_eq!(a.render_jsonl(), b.render_jsonl());
        prop_assert_eq!(desk_a.forum(), desk_b.forum());
        prop_assert_eq!(a.usage.total, fixture.expected.commands());
        prop_assert_eq!(a.edits.under_threshold, fixture.expected.under_threshold());
    }
}
