use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use draftdesk::replay::synth::{self, CourseShape, FIRST_MATERIAL_ID, MATERIALS};

fn draftdesk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_draftdesk"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const REFERENCE_TABLE: &str = "\
Prompts Combination           Usage Proportion   Count
------------------------------------------------------
help                                       34%      68
reply∅ anon                                21%      42
reply■ anon                                18%      36
reply∅ anon related                         8%      16
reply∅                                      6%      12
reply■                                      6%      12
reply∅ anon prev                            2%       4
reply∅ prev                                 2%       4
reply∅ related prev                         2%       4
reply■ anon related                         1%       2
reply■ related prev                       < 1%       1
------------------------------------------------------
Total interactions                        100%     201
";

#[test]
fn usage_report_golden() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "events.jsonl", &synth::reference_usage_mix().transcript());
    let out = draftdesk(&["report", "--usage", "--from", log.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), REFERENCE_TABLE);
    let again = draftdesk(&["report", "--usage", "--from", log.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(stdout(&again), REFERENCE_TABLE);
}

#[test]
fn report_on_an_empty_log_prints_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "events.jsonl", "");
    let usage = draftdesk(&["report", "--usage", "--from", log.to_str().unwrap()]);
    assert_eq!(usage.status.code(), Some(0));
    assert_eq!(
        stdout(&usage),
        "\
Prompts Combination           Usage Proportion   Count
------------------------------------------------------
------------------------------------------------------
Total interactions                          0%       0
"
    );
    let edits = draftdesk(&["report", "--edits", "--from", log.to_str().unwrap()]);
    assert_eq!(edits.status.code(), Some(0));
    assert_eq!(
        stdout(&edits),
        "   Draft    Thread  Additions  Removals   Total\n\
         adopted answers: 0; additions: 0; removals: 0; fewer than 10 edits: 0 (0.0000)\n"
    );
}

#[test]
fn edits_report_on_unedited_drafts_is_all_zero() {
    let shape = CourseShape {
        students: 4,
        questions: 6,
        answered: 4,
        regenerated: 0,
        help: 0,
        under_ten: 4,
        unedited: 4,
        reply_mix: vec![("reply∅".into(), 4)],
    };
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "events.jsonl", &synth::course(3, &shape).transcript());
    let out = draftdesk(&["report", "--edits", "--from", log.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).take(4).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(&cols[2..], ["0", "0", "0"], "{row}");
    }
    assert!(
        text.ends_with("adopted answers: 4; additions: 0; removals: 0; fewer than 10 edits: 4 (1.0000)\n"),
        "{text}"
    );
}

#[test]
fn report_flags_are_exclusive_and_required() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "events.jsonl", "");
    let log = log.to_str().unwrap();
    for args in [
        vec!["report", "--usage", "--edits", "--from", log],
        vec!["report", "--from", log],
        vec!["report", "--usage"],
        vec!["report", "--usage", "--from", log, "--bogus"],
        vec![],
        vec!["frobnicate"],
    ] {
        let out = draftdesk(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains("Usage"), "{args:?}: {}", stderr(&out));
    }
    let missing = draftdesk(&["report", "--usage", "--from", "/nonexistent/log"]);
    assert_eq!(missing.status.code(), Some(3));
}

fn corpus(dir: &Path) -> (PathBuf, PathBuf, PathBuf, String) {
    let archive = synth::archive_jsonl(11, 253, 95);
    let previous = write(dir, "archive.jsonl", &archive);
    let material = dir.join("material");
    fs::create_dir_all(&material).unwrap();
    let mut manifest = String::new();
    for (i, (title, _)) in MATERIALS.iter().enumerate() {
        let file = format!("m{i}.md");
        fs::write(material.join(&file), synth::material_text(i)).unwrap();
        manifest.push_str(
            &serde_json::json!({"id": FIRST_MATERIAL_ID + i as u64, "file": file, "title": title}).to_string(),
        );
        manifest.push('\n');
    }
    let manifest = write(dir, "manifest.jsonl", &manifest);
    (previous, material, manifest, archive)
}

#[test]
fn ingest_reports_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (previous, material, manifest, archive) = corpus(dir.path());
    let data = dir.path().join("data");
    let config = write(
        dir.path(),
        "config.toml",
        &format!("[server]\ndata_dir = \"{}\"\n", data.display()),
    );
    let args = [
        "ingest",
        "--previous",
        previous.to_str().unwrap(),
        "--related",
        material.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ];
    let first = draftdesk(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let text = stdout(&first);
    let unanswered = archive.lines().filter(|l| l.contains("\"answer\":\"\"")).count();
    assert!(unanswered > 0);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "category     items  chunks");
    assert!(lines[1].starts_with("previous       253"), "{text}");
    assert!(
        lines[2].starts_with(&format!("related     {:>6}", MATERIALS.len())),
        "{text}"
    );
    assert_eq!(lines[3], "answered via tool: 95");
    assert_eq!(lines[4], format!("unanswered: {unanswered}"));
    // the 2500-word handout spans several chunks
    let related_chunks: usize = lines[2].split_whitespace().last().unwrap().parse().unwrap();
    assert!(related_chunks > MATERIALS.len());

    let second = draftdesk(&args);
    assert!(second.status.success());
    assert_eq!(stdout(&second), text);
    assert!(data.join("vectors.jsonl").exists());
    let log = fs::read_to_string(data.join("events.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn ingest_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (previous, material, manifest, _) = corpus(dir.path());
    let no_manifest = draftdesk(&[
        "ingest",
        "--previous",
        previous.to_str().unwrap(),
        "--related",
        material.to_str().unwrap(),
    ]);
    assert_eq!(no_manifest.status.code(), Some(2));
    assert!(stderr(&no_manifest).contains("--manifest"));

    let bad = write(
        dir.path(),
        "bad.jsonl",
        "{\"id\": 1, \"category\": \"previous\", \"title\": \"a\", \"body\": \"b\"}\n\n{\"id\": 2, \"title\": \"no category\"}\n",
    );
    let data = dir.path().join("data");
    let config = write(
        dir.path(),
        "config.toml",
        &format!("[server]\ndata_dir = \"{}\"\n", data.display()),
    );
    let out = draftdesk(&[
        "ingest",
        "--previous",
        bad.to_str().unwrap(),
        "--related",
        material.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("bad.jsonl:3:"), "{}", stderr(&out));
    assert!(!data.join("events.jsonl").exists());

    let bad_config = write(dir.path(), "bad.toml", "[store]\nhelp_k = 0\n");
    let out = draftdesk(&[
        "ingest",
        "--previous",
        previous.to_str().unwrap(),
        "--related",
        material.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--config",
        bad_config.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("help_k"));
}

#[test]
fn replay_is_byte_identical_and_names_bad_lines() {
    let shape = CourseShape {
        students: 5,
        questions: 12,
        answered: 6,
        regenerated: 1,
        help: 3,
        under_ten: 4,
        unedited: 1,
        reply_mix: vec![("reply∅ anon".into(), 4), ("reply■ related prev".into(), 3)],
    };
    let fixture = synth::course(21, &shape);
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "course.jsonl", &fixture.transcript());
    let a = draftdesk(&["replay", path.to_str().unwrap(), "--seed", "3"]);
    let b = draftdesk(&["replay", path.to_str().unwrap(), "--seed", "3"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("Usage\n"));
    assert!(text.contains(&format!(
        "Total interactions                        100%  {:>6}",
        fixture.expected.commands()
    )));
    assert!(text.contains(&format!("fewer than 10 edits: {} ", fixture.expected.under_threshold())));

    let jsonl = draftdesk(&["replay", path.to_str().unwrap(), "--jsonl"]);
    for line in stdout(&jsonl).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["record"].is_string());
    }

    let mut lines: Vec<String> = fixture.transcript().lines().map(String::from).collect();
    lines[4] = "{\"type\": \"comment\", \"time\": \"not a time\"}".into();
    let broken = write(dir.path(), "broken.jsonl", &lines.join("\n"));
    let out = draftdesk(&["replay", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 5"), "{}", stderr(&out));

    let empty = write(dir.path(), "empty.jsonl", "\n");
    let out = draftdesk(&["replay", empty.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Total interactions                          0%       0"));
}

#[test]
fn serve_fails_fast_on_bad_config_or_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        "[[users]]\nid = \"assistant\"\nrole = \"instructor\"\ntoken = \"t\"\n",
    );
    let out = draftdesk(&["serve", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("reserved"), "{}", stderr(&out));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = busy.local_addr().unwrap().to_string();
    let config = write(
        dir.path(),
        "ok.toml",
        &format!("[server]\ndata_dir = \"{}\"\n", dir.path().join("data").display()),
    );
    let out = draftdesk(&["serve", "--config", config.to_str().unwrap(), "--addr", &addr]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot bind"), "{}", stderr(&out));
}
