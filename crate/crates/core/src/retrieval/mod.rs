//! Context retrieval over course material and archived forum posts.
//!
//! Items are split into overlapping word windows, each window is embedded and
//! L2-normalised, and queries are answered by exhaustive cosine similarity.
//! An item's score is the best score of any of its chunks.

mod chunk;
pub mod corpus;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;

pub use chunk::{chunk_text, Chunk, ChunkConfig};
pub use store::{StoredChunk, VectorStore, STORE_FORMAT, STORE_VERSION};

/// Stable corpus identifier, as printed in `#help` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// Archived forum posts, question plus answers.
    Previous,
    /// Course material and assignment handouts.
    Related,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Previous => "previous",
            Category::Related => "related",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub item_id: ItemId,
    pub category: Category,
    pub title: String,
    pub body: String,
    /// Provenance, e.g. `archive-2023` or a handout file name.
    pub source: String,
    /// Archived post whose answer field was empty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unanswered: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub answered_via_tool: bool,
}

impl CorpusItem {
    pub fn new(
        item_id: u64,
        category: Category,
        title: impl Into<String>,
        body: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        CorpusItem {
            item_id: ItemId(item_id),
            category,
            title: title.into(),
            body: body.into(),
            source: source.into(),
            unanswered: false,
            answered_via_tool: false,
        }
    }
}

const UNIT_TOLERANCE: f64 = 1e-6;

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("zero vector cannot be normalised")]
    Zero,
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("vector is empty")]
    Empty,
    #[error("vector is not unit length (norm {0})")]
    NotUnit(String),
}

impl EmbeddingVector {
    /// L2-normalises `values`.
    pub fn normalized(values: Vec<f32>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(VectorError::Zero);
        }
        Ok(EmbeddingVector(
            values.into_iter().map(|v| (f64::from(v) / norm) as f32).collect(),
        ))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    /// Cosine similarity with another unit vector.
    pub fn cosine(&self, other: &EmbeddingVector) -> f32 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = VectorError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        let v = EmbeddingVector(values);
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(VectorError::NotUnit(format!("{norm}")));
        }
        Ok(v)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextMatch {
    pub item_id: ItemId,
    pub score: f32,
    /// 1-based.
    pub rank: usize,
}

/// The two ranked lists shown to an instructor after `#help`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpResult {
    pub previous: Vec<ContextMatch>,
    pub related: Vec<ContextMatch>,
    /// Set when there was nothing to search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl HelpResult {
    pub fn is_empty(&self) -> bool {
        self.previous.is_empty() && self.related.is_empty()
    }

    /// Plain-text rendering with titles, scores and the prompt cheat sheet.
    pub fn render(&self, store: &VectorStore) -> String {
        let mut out = String::new();
        if let Some(w) = &self.warning {
            out.push_str(&format!("warning: {w}\n\n"));
        }
        for (heading, list) in [("Previous posts", &self.previous), ("Related material", &self.related)] {
            out.push_str(heading);
            out.push_str(":\n");
            if list.is_empty() {
                out.push_str("  (none)\n");
            }
            for m in list {
                let (title, unanswered) = store
                    .item(m.item_id)
                    .map(|i| (i.title.as_str(), i.unanswered))
                    .unwrap_or(("?", false));
                out.push_str(&format!(
                    "  {}. [{}] {}{} (score {:.3})\n",
                    m.rank,
                    m.item_id,
                    title,
                    if unanswered { " [unanswered]" } else { "" },
                    m.score
                ));
            }
            out.push('\n');
        }
        out.push_str(crate::command::CHEAT_SHEET);
        out.push('\n');
        out
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown context identifier(s): {}", join(.0))]
    UnknownIds(Vec<ItemId>),
    #[error("category mismatch: item {id} is {actual}, expected {expected}")]
    CategoryMismatch {
        id: ItemId,
        expected: Category,
        actual: Category,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("ingestion of item {item} failed: {source}")]
    Ingest {
        item: ItemId,
        #[source]
        source: ProviderError,
    },
    #[error("retrieval failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("store file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("store format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

fn join(ids: &[ItemId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_rejects_zero() {
        assert_eq!(EmbeddingVector::normalized(vec![0.0; 4]), Err(VectorError::Zero));
        assert_eq!(EmbeddingVector::normalized(vec![]), Err(VectorError::Empty));
        assert_eq!(
            EmbeddingVector::normalized(vec![f32::NAN, 1.0]),
            Err(VectorError::NonFinite)
        );
    }

    #[test]
    fn normalised_vectors_are_unit() {
        let v = EmbeddingVector::normalized(vec![3.0, 4.0, 0.0]).unwrap();
        assert!((v.norm() - 1.0).abs() <= 1e-6);
        assert!((v.cosine(&v) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn deserialising_checks_unit_norm() {
        assert!(serde_json::from_str::<EmbeddingVector>("[0.6,0.8]").is_ok());
        assert!(serde_json::from_str::<EmbeddingVector>("[1.0,1.0]").is_err());
    }
}
