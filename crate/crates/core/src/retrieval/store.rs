use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    chunk_text, Category, Chunk, ChunkConfig, ContextMatch, CorpusItem, EmbeddingVector, HelpResult, ItemId,
    RetrievalError,
};
use crate::provider::{EmbeddingProvider, ProviderError};

pub const STORE_FORMAT: &str = "draftdesk-vectors";
pub const STORE_VERSION: u32 = 1;

/// Number of items per list in a help result.
const HELP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredChunk {
    pub chunk: Chunk,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredItem {
    item: CorpusItem,
    chunks: Vec<StoredChunk>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dimension: Option<usize>,
    model: Option<String>,
    chunking: ChunkConfig,
}

/// In-memory embedding store with exhaustive cosine search.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    chunking: ChunkConfig,
    help_k: usize,
    dimension: Option<usize>,
    model: Option<String>,
    items: BTreeMap<ItemId, StoredItem>,
}

impl Default for VectorStore {
    fn default() -> Self {
        Self::new(ChunkConfig::default())
    }
}

impl VectorStore {
    pub fn new(chunking: ChunkConfig) -> Self {
        VectorStore {
            chunking,
            help_k: HELP_K,
            dimension: None,
            model: None,
            items: BTreeMap::new(),
        }
    }

    /// Overrides the per-list size of [`VectorStore::help`].
    pub fn with_help_k(mut self, k: usize) -> Self {
        self.help_k = k.max(1);
        self
    }

    pub fn chunking(&self) -> ChunkConfig {
        self.chunking
    }

    /// Embedding dimension, pinned by the first ingestion.
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn model(&self) -> Option<&str> {
        self.model.as_deref()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: ItemId) -> Option<&CorpusItem> {
        self.items.get(&id).map(|s| &s.item)
    }

    pub fn items(&self) -> impl Iterator<Item = &CorpusItem> {
        self.items.values().map(|s| &s.item)
    }

    pub fn chunks(&self, id: ItemId) -> &[StoredChunk] {
        self.items.get(&id).map(|s| s.chunks.as_slice()).unwrap_or(&[])
    }

    pub fn category_len(&self, category: Category) -> usize {
        self.items().filter(|i| i.category == category).count()
    }

    pub fn chunk_count(&self, category: Category) -> usize {
        self.items
            .values()
            .filter(|s| s.item.category == category)
            .map(|s| s.chunks.len())
            .sum()
    }

    fn validate_batch(&self, items: &[CorpusItem]) -> Result<(), RetrievalError> {
        let mut seen = BTreeSet::new();
        for item in items {
            if !seen.insert(item.item_id) {
                return Err(RetrievalError::Validation(format!(
                    "duplicate item id {} in batch",
                    item.item_id
                )));
            }
            if item.item_id.0 == 0 {
                return Err(RetrievalError::Validation("item ids must be positive".into()));
            }
            if item.body.trim().is_empty() {
                return Err(RetrievalError::Validation(format!(
                    "item {} has an empty body",
                    item.item_id
                )));
            }
            if let Some(existing) = self.item(item.item_id) {
                if existing.category != item.category {
                    return Err(RetrievalError::Validation(format!(
                        "item {} is already stored as {}",
                        item.item_id, existing.category
                    )));
                }
            }
        }
        Ok(())
    }

    fn pin(&mut self, dimension: usize, model: &str) -> Result<(), RetrievalError> {
        match self.dimension {
            Some(d) if d != dimension => Err(RetrievalError::Config(format!(
                "embedding dimension {dimension} does not match store dimension {d}"
            ))),
            _ => {
                self.dimension = Some(dimension);
                if self.model.is_none() {
                    self.model = Some(model.to_string());
                }
                Ok(())
            }
        }
    }

    /// Chunks, embeds and stores `items`; returns the number of chunks stored.
    ///
    /// Re-ingesting an id replaces its chunks. Items are processed in order and
    /// a provider failure stops the batch at the failing item, leaving it and
    /// everything already stored untouched.
    pub fn ingest(
        &mut self,
        items: Vec<CorpusItem>,
        provider: &dyn EmbeddingProvider,
    ) -> Result<usize, RetrievalError> {
        self.chunking.validate().map_err(RetrievalError::Config)?;
        self.validate_batch(&items)?;
        let mut stored = 0;
        for item in items {
            let texts = chunk_text(&item.body, self.chunking);
            let vectors = provider.embed_batch(&texts).map_err(|source| RetrievalError::Ingest {
                item: item.item_id,
                source,
            })?;
            if vectors.len() != texts.len() {
                return Err(RetrievalError::Ingest {
                    item: item.item_id,
                    source: ProviderError::Malformed(format!(
                        "expected {} embeddings, got {}",
                        texts.len(),
                        vectors.len()
                    )),
                });
            }
            if let Some(dim) = vectors.first().map(EmbeddingVector::dimension) {
                if vectors.iter().any(|v| v.dimension() != dim) {
                    return Err(RetrievalError::Config("provider returned mixed dimensions".into()));
                }
                self.pin(dim, provider.model())?;
            }
            let chunks: Vec<StoredChunk> = texts
                .into_iter()
                .zip(vectors)
                .enumerate()
                .map(|(position, (text, vector))| StoredChunk {
                    chunk: Chunk {
                        chunk_id: format!("{}:{}", item.item_id, position),
                        parent: item.item_id,
                        text,
                        position,
                    },
                    vector,
                })
                .collect();
            stored += chunks.len();
            self.items.insert(item.item_id, StoredItem { item, chunks });
        }
        Ok(stored)
    }

    /// Removes an item and its chunks.
    pub fn remove(&mut self, id: ItemId) -> Option<CorpusItem> {
        self.items.remove(&id).map(|s| s.item)
    }

    pub fn embed_query(
        &self,
        query: &str,
        provider: &dyn EmbeddingProvider,
    ) -> Result<EmbeddingVector, RetrievalError> {
        let mut vectors = provider.embed_batch(&[query.to_string()])?;
        let v = vectors
            .pop()
            .ok_or_else(|| ProviderError::Malformed("no embedding returned".into()))?;
        if let Some(d) = self.dimension {
            if v.dimension() != d {
                return Err(RetrievalError::Config(format!(
                    "query dimension {} does not match store dimension {d}",
                    v.dimension()
                )));
            }
        }
        Ok(v)
    }

    /// Ranks the items of `category` against an already-embedded query.
    pub fn top_k_vector(&self, query: &EmbeddingVector, category: Category, k: usize) -> Vec<ContextMatch> {
        let mut scored: Vec<(ItemId, f32)> = self
            .items
            .values()
            .filter(|s| s.item.category == category && !s.chunks.is_empty())
            .map(|s| {
                let best = s
                    .chunks
                    .iter()
                    .map(|c| c.vector.cosine(query))
                    .fold(f32::NEG_INFINITY, f32::max);
                (s.item.item_id, best)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (item_id, score))| ContextMatch {
                item_id,
                score,
                rank: i + 1,
            })
            .collect()
    }

    /// Embeds `query` and returns the `k` best items of `category`.
    pub fn top_k(
        &self,
        query: &str,
        category: Category,
        k: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<ContextMatch>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::Validation("k must be at least 1".into()));
        }
        if query.trim().is_empty() {
            return Err(RetrievalError::Validation("query is empty".into()));
        }
        if self.category_len(category) == 0 {
            return Ok(Vec::new());
        }
        let q = self.embed_query(query, provider)?;
        Ok(self.top_k_vector(&q, category, k))
    }

    /// The five best previous posts and the five best related items.
    pub fn help(&self, question: &str, provider: &dyn EmbeddingProvider) -> Result<HelpResult, RetrievalError> {
        if question.trim().is_empty() {
            return Err(RetrievalError::Validation("question is empty".into()));
        }
        if self.is_empty() {
            return Ok(HelpResult {
                previous: Vec::new(),
                related: Vec::new(),
                warning: Some("no context items have been ingested".into()),
            });
        }
        let q = self.embed_query(question, provider)?;
        Ok(self.help_vector(&q))
    }

    /// [`VectorStore::help`] for an already-embedded question.
    pub fn help_vector(&self, query: &EmbeddingVector) -> HelpResult {
        if self.is_empty() {
            return HelpResult {
                previous: Vec::new(),
                related: Vec::new(),
                warning: Some("no context items have been ingested".into()),
            };
        }
        HelpResult {
            previous: self.top_k_vector(query, Category::Previous, self.help_k),
            related: self.top_k_vector(query, Category::Related, self.help_k),
            warning: None,
        }
    }

    /// Looks up items by id, in the order given.
    pub fn resolve(&self, refs: &[ItemId], category: Category) -> Result<Vec<CorpusItem>, RetrievalError> {
        if refs.is_empty() {
            return Err(RetrievalError::Validation("no context identifiers given".into()));
        }
        let unknown: Vec<ItemId> = refs.iter().copied().filter(|id| self.item(*id).is_none()).collect();
        if !unknown.is_empty() {
            return Err(RetrievalError::UnknownIds(unknown));
        }
        refs.iter()
            .map(|id| {
                let item = &self.items[id].item;
                if item.category != category {
                    Err(RetrievalError::CategoryMismatch {
                        id: *id,
                        expected: category,
                        actual: item.category,
                    })
                } else {
                    Ok(item.clone())
                }
            })
            .collect()
    }

    /// Writes the store as line-delimited JSON: one header line, then one
    /// line per item with its chunks and vectors. The file is replaced
    /// atomically.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            let header = Header {
                format: STORE_FORMAT.into(),
                version: STORE_VERSION,
                dimension: self.dimension,
                model: self.model.clone(),
                chunking: self.chunking,
            };
            serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            for item in self.items.values() {
                serde_json::to_writer(&mut w, item).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let format_err = |line: usize, message: String| RetrievalError::Format { line, message };
        let (_, first) = lines.next().ok_or_else(|| format_err(1, "missing header".into()))?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| format_err(1, e.to_string()))?;
        if header.format != STORE_FORMAT {
            return Err(format_err(1, format!("unexpected format {:?}", header.format)));
        }
        if header.version != STORE_VERSION {
            return Err(format_err(1, format!("unsupported version {}", header.version)));
        }
        let mut store = VectorStore::new(header.chunking);
        store.dimension = header.dimension;
        store.model = header.model;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let item: StoredItem = serde_json::from_str(&line).map_err(|e| format_err(i + 1, e.to_string()))?;
            if let Some(d) = store.dimension {
                if item.chunks.iter().any(|c| c.vector.dimension() != d) {
                    return Err(format_err(i + 1, "vector dimension mismatch".into()));
                }
            }
            store.items.insert(item.item.item_id, item);
        }
        Ok(store)
    }
}
