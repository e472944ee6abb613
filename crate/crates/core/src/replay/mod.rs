//! Deterministic re-execution of transcripts and report rendering.

pub mod synth;

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use crate::analytics::{format_percent, AdoptionStats, EditSeries, UsageReport};
use crate::desk::{Desk, DeskConfig};
use crate::provider::MockProvider;
use crate::retrieval::{ChunkConfig, VectorStore};
use crate::transcript::{parse_transcript, Applier, EventRecord, TranscriptError};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOptions {
    /// Seed of the mock provider.
    pub seed: u64,
    pub dimension: usize,
    pub desk: DeskConfig,
    pub chunking: ChunkConfig,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            seed: 0,
            dimension: 256,
            desk: DeskConfig::default(),
            chunking: ChunkConfig::default(),
        }
    }
}

impl ReplayOptions {
    pub fn with_seed(seed: u64) -> Self {
        ReplayOptions {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ReplayReport {
    pub usage: UsageReport,
    pub edits: EditSeries,
    pub adoption: AdoptionStats,
}

impl ReplayReport {
    pub fn from_desk(desk: &Desk) -> Self {
        ReplayReport {
            usage: desk.usage_report(),
            edits: desk.edit_series(),
            adoption: desk.adoption(),
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::from("Usage\n\n");
        out.push_str(&self.usage.render_table());
        out.push_str("\nEdits\n\n");
        out.push_str(&self.edits.render_table());
        out.push_str("\nAdoption\n\n");
        out.push_str(&self.adoption.render());
        out
    }

    /// One JSON object per line, tagged by `record`.
    pub fn render_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |v: serde_json::Value| {
            let _ = writeln!(out, "{v}");
        };
        for row in &self.usage.rows {
            line(json!({
                "record": "usage",
                "label": row.label,
                "count": row.count,
                "proportion": row.proportion,
                "display": format_percent(row.proportion),
            }));
        }
        line(json!({"record": "usage_total", "total": self.usage.total}));
        for p in &self.edits.points {
            line(json!({
                "record": "edit",
                "draft_id": p.draft_id,
                "thread_id": p.thread_id,
                "additions": p.additions,
                "removals": p.removals,
            }));
        }
        line(json!({
            "record": "edit_summary",
            "adopted": self.edits.points.len(),
            "under_threshold": self.edits.under_threshold,
            "fraction_under_threshold": self.edits.fraction_under_threshold,
        }));
        let mut adoption = serde_json::to_value(self.adoption).expect("stats serialise");
        adoption["record"] = json!("adoption");
        line(adoption);
        out
    }
}

/// Replays records with the mock provider and returns the final desk and
/// its reports.
pub fn replay_records(
    records: &[(usize, EventRecord)],
    options: &ReplayOptions,
) -> Result<(Desk, ReplayReport), TranscriptError> {
    let mock = MockProvider::new(options.seed, options.dimension.max(1));
    let mut desk = Desk::new(options.desk.clone(), VectorStore::new(options.chunking));
    let mut applier = Applier::new(&mut desk, Some(&mock), Some(&mock));
    applier.apply_all(records)?;
    let report = ReplayReport::from_desk(&desk);
    Ok((desk, report))
}

/// Parses and replays transcript text.
pub fn replay(text: &str, options: &ReplayOptions) -> Result<ReplayReport, TranscriptError> {
    let records = parse_transcript(text)?;
    Ok(replay_records(&records, options)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_transcript_gives_empty_reports() {
        let r = replay("", &ReplayOptions::default()).unwrap();
        assert_eq!(r.usage.total, 0);
        assert!(r.usage.rows.is_empty());
        assert!(r.edits.points.is_empty());
        assert_eq!(r.adoption, AdoptionStats::default());
        assert!(r.render_text().contains("Prompts Combination"));
    }

    const REFERENCE_PERCENT: [(&str, &str); 11] = [
        ("help", "34%"),
        ("reply∅ anon", "21%"),
        ("reply■ anon", "18%"),
        ("reply∅ anon related", "8%"),
        ("reply■", "6%"),
        ("reply∅", "6%"),
        ("reply∅ prev", "2%"),
        ("reply∅ anon prev", "2%"),
        ("reply∅ related prev", "2%"),
        ("reply■ anon related", "1%"),
        ("reply■ related prev", "< 1%"),
    ];

    #[test]
    fn reference_mix_reproduces_printed_percentages() {
        let fx = synth::reference_usage_mix();
        let r = replay(&fx.transcript(), &ReplayOptions::default()).unwrap();
        assert_eq!(r.usage.total, 201);
        let shown: Vec<(String, String)> = r
            .usage
            .rows
            .iter()
            .map(|row| (row.label.to_string(), format_percent(row.proportion)))
            .collect();
        for (label, pct) in REFERENCE_PERCENT {
            assert!(
                shown.contains(&(label.to_string(), pct.to_string())),
                "{label} {pct} in {shown:?}"
            );
        }
    }
}
