//! Corpus input files.
//!
//! Archived posts come as line-delimited JSON, one record per line:
//!
//! ```text
//! {"id": 2, "category": "previous", "title": "Lecture recording", "body": "...", "source": "archive-2023", "answer": "..."}
//! ```
//!
//! `answer` is optional; when present it is appended to the body, and when
//! present but empty the item is marked unanswered. `answered_via_tool` is an
//! optional boolean carried through for reporting.
//!
//! Course material is a directory of text or Markdown files plus a manifest,
//! also line-delimited, assigning ids:
//!
//! ```text
//! {"id": 42, "file": "assignment-1.md", "title": "Assignment 1", "source": "handout"}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{Category, CorpusItem, ItemId};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: u64,
    category: Category,
    title: String,
    body: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    answered_via_tool: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: u64,
    file: PathBuf,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn records<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<Vec<(usize, T)>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Parses line-delimited corpus records.
pub fn parse_records(path: &Path, text: &str) -> Result<Vec<CorpusItem>, CorpusError> {
    records::<Record>(path, text)?
        .into_iter()
        .map(|(line, r)| {
            if r.id == 0 {
                return Err(CorpusError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "id must be positive".into(),
                });
            }
            let unanswered = matches!(&r.answer, Some(a) if a.trim().is_empty());
            let body = match &r.answer {
                Some(a) if !a.trim().is_empty() => format!("{}\n\nAnswer:\n{}", r.body, a),
                _ => r.body,
            };
            Ok(CorpusItem {
                item_id: ItemId(r.id),
                category: r.category,
                title: r.title,
                body,
                source: r.source,
                unanswered,
                answered_via_tool: r.answered_via_tool,
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusItem>, CorpusError> {
    parse_records(path, &read(path)?)
}

fn heading_title(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("# "))
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
}

/// Reads course material files listed in `manifest`, resolved against `dir`.
pub fn read_material(dir: &Path, manifest: &Path) -> Result<Vec<CorpusItem>, CorpusError> {
    let entries = records::<ManifestEntry>(manifest, &read(manifest)?)?;
    entries
        .into_iter()
        .map(|(line, e)| {
            if e.id == 0 {
                return Err(CorpusError::Parse {
                    path: manifest.to_path_buf(),
                    line,
                    message: "id must be positive".into(),
                });
            }
            let file = dir.join(&e.file);
            let body = read(&file)?;
            let title = e.title.or_else(|| heading_title(&body)).unwrap_or_else(|| {
                e.file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let source = e.source.unwrap_or_else(|| e.file.display().to_string());
            Ok(CorpusItem::new(e.id, Category::Related, title, body, source))
        })
        .collect()
}
