//! Usage and edit measurement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffTag};

use crate::command::{classify, CombinationLabel, ValidatedCommand};
use crate::drafting::{Draft, DraftId, DraftStatus};
use crate::forum::{Forum, PostKind, ThreadId};

/// Word-level additions and removals between two texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditMetrics {
    pub additions: usize,
    pub removals: usize,
}

impl EditMetrics {
    pub fn total(&self) -> usize {
        self.additions + self.removals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordTag {
    Equal,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordOp {
    pub tag: WordTag,
    pub words: Vec<String>,
}

pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Minimal word-level edit script from `original` to `final_text`.
pub fn word_diff(original: &str, final_text: &str) -> Vec<WordOp> {
    let old = words(original);
    let new = words(final_text);
    let mut out = Vec::new();
    let mut push = |tag: WordTag, ws: &[&str]| {
        if !ws.is_empty() {
            out.push(WordOp {
                tag,
                words: ws.iter().map(|w| w.to_string()).collect(),
            });
        }
    };
    for op in capture_diff_slices(Algorithm::Myers, &old, &new) {
        let (tag, o, n) = op.as_tag_tuple();
        match tag {
            DiffTag::Equal => push(WordTag::Equal, &old[o]),
            DiffTag::Delete => push(WordTag::Delete, &old[o]),
            DiffTag::Insert => push(WordTag::Insert, &new[n]),
            DiffTag::Replace => {
                push(WordTag::Delete, &old[o]);
                push(WordTag::Insert, &new[n]);
            }
        }
    }
    out
}

/// Words outside a longest common subsequence: inserted words count as
/// additions, deleted words as removals.
pub fn diff_edits(original: &str, final_text: &str) -> EditMetrics {
    word_diff(original, final_text)
        .iter()
        .fold(EditMetrics::default(), |mut m, op| {
            match op.tag {
                WordTag::Insert => m.additions += op.words.len(),
                WordTag::Delete => m.removals += op.words.len(),
                WordTag::Equal => {}
            }
            m
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRow {
    pub label: CombinationLabel,
    pub count: usize,
    /// Percentage of all interactions.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageReport {
    pub rows: Vec<UsageRow>,
    pub total: usize,
}

/// Percentage as printed in usage tables: whole percent, or `< 1%` for a
/// non-zero share that rounds to zero.
pub fn format_percent(p: f64) -> String {
    let rounded = p.round();
    if rounded == 0.0 && p > 0.0 {
        "< 1%".to_string()
    } else {
        format!("{rounded:.0}%")
    }
}

pub const USAGE_HEADERS: [&str; 3] = ["Prompts Combination", "Usage Proportion", "Count"];

impl UsageReport {
    pub fn count(&self, label: &str) -> usize {
        self.rows
            .iter()
            .find(|r| r.label.as_str() == label)
            .map(|r| r.count)
            .unwrap_or(0)
    }

    /// Fixed-width plain-text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let [a, b, c] = USAGE_HEADERS;
        let _ = writeln!(out, "{a:<28}  {b:>16}  {c:>6}");
        let _ = writeln!(out, "{}", "-".repeat(28 + 2 + 16 + 2 + 6));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<28}  {:>16}  {:>6}",
                row.label.as_str(),
                format_percent(row.proportion),
                row.count
            );
        }
        let _ = writeln!(out, "{}", "-".repeat(28 + 2 + 16 + 2 + 6));
        let share = if self.total == 0 { "0%" } else { "100%" };
        let _ = writeln!(out, "{:<28}  {:>16}  {:>6}", "Total interactions", share, self.total);
        out
    }
}

/// Tabulates commands by combination, most frequent first (ties by label).
pub fn usage_report<'a>(events: impl IntoIterator<Item = &'a ValidatedCommand>) -> UsageReport {
    let mut counts: BTreeMap<CombinationLabel, usize> = BTreeMap::new();
    let mut total = 0;
    for cmd in events {
        *counts.entry(classify(cmd)).or_default() += 1;
        total += 1;
    }
    let mut rows: Vec<UsageRow> = counts
        .into_iter()
        .map(|(label, count)| UsageRow {
            label,
            count,
            proportion: 100.0 * count as f64 / total as f64,
        })
        .collect();
    rows.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.label.cmp(&y.label)));
    UsageReport { rows, total }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPoint {
    pub draft_id: DraftId,
    pub thread_id: ThreadId,
    pub additions: usize,
    pub removals: usize,
}

/// Per-draft edit counts for adopted (published) drafts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditSeries {
    pub points: Vec<EditPoint>,
    /// Drafts with fewer than [`EDIT_THRESHOLD`] combined edits.
    pub under_threshold: usize,
    pub fraction_under_threshold: f64,
}

pub const EDIT_THRESHOLD: usize = 10;

pub fn edit_distribution<'a>(drafts: impl IntoIterator<Item = &'a Draft>) -> EditSeries {
    let points: Vec<EditPoint> = drafts
        .into_iter()
        .filter(|d| d.status == DraftStatus::Published)
        .map(|d| {
            let m = d
                .edit_metrics
                .unwrap_or_else(|| diff_edits(d.generated_text(), &d.current_text));
            EditPoint {
                draft_id: d.draft_id,
                thread_id: d.thread_id,
                additions: m.additions,
                removals: m.removals,
            }
        })
        .collect();
    let under = points
        .iter()
        .filter(|p| p.additions + p.removals < EDIT_THRESHOLD)
        .count();
    let fraction = if points.is_empty() {
        0.0
    } else {
        under as f64 / points.len() as f64
    };
    EditSeries {
        points,
        under_threshold: under,
        fraction_under_threshold: fraction,
    }
}

impl EditSeries {
    pub fn total_additions(&self) -> usize {
        self.points.iter().map(|p| p.additions).sum()
    }

    pub fn total_removals(&self) -> usize {
        self.points.iter().map(|p| p.removals).sum()
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8}  {:>8}  {:>9}  {:>8}  {:>6}",
            "Draft", "Thread", "Additions", "Removals", "Total"
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:>8}  {:>8}  {:>9}  {:>8}  {:>6}",
                p.draft_id,
                p.thread_id,
                p.additions,
                p.removals,
                p.additions + p.removals
            );
        }
        let _ = writeln!(
            out,
            "adopted answers: {}; additions: {}; removals: {}; fewer than {} edits: {} ({:.4})",
            self.points.len(),
            self.total_additions(),
            self.total_removals(),
            EDIT_THRESHOLD,
            self.under_threshold,
            self.fraction_under_threshold
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdoptionStats {
    pub questions_total: usize,
    pub questions_answered_via_tool: usize,
    pub drafts_created: usize,
    pub drafts_published_unedited: usize,
    pub drafts_published_edited: usize,
    pub drafts_discarded: usize,
    /// Drafts still awaiting a decision.
    pub drafts_pending: usize,
}

pub fn adoption_stats<'a>(forum: &Forum, drafts: impl IntoIterator<Item = &'a Draft>) -> AdoptionStats {
    let mut stats = AdoptionStats {
        questions_total: forum
            .threads()
            .filter(|t| t.question.kind == PostKind::StudentMessage)
            .count(),
        ..AdoptionStats::default()
    };
    let mut answered = std::collections::BTreeSet::new();
    for d in drafts {
        stats.drafts_created += 1;
        match d.status {
            DraftStatus::Published => {
                answered.insert(d.thread_id);
                let m = d
                    .edit_metrics
                    .unwrap_or_else(|| diff_edits(d.generated_text(), &d.current_text));
                if m.total() == 0 {
                    stats.drafts_published_unedited += 1;
                } else {
                    stats.drafts_published_edited += 1;
                }
            }
            DraftStatus::Discarded => stats.drafts_discarded += 1,
            DraftStatus::Pending | DraftStatus::Edited => stats.drafts_pending += 1,
        }
    }
    stats.questions_answered_via_tool = answered.len();
    stats
}

impl AdoptionStats {
    pub fn render(&self) -> String {
        format!(
            "questions: {}\nanswered via tool: {}\ndrafts created: {}\npublished unedited: {}\npublished edited: {}\ndiscarded: {}\npending: {}\n",
            self.questions_total,
            self.questions_answered_via_tool,
            self.drafts_created,
            self.drafts_published_unedited,
            self.drafts_published_edited,
            self.drafts_discarded,
            self.drafts_pending
        )
    }
}
