use serde::{Deserialize, Serialize};

use super::ItemId;

/// Sliding-window chunking over whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            max_tokens: 800,
            overlap_tokens: 100,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        if self.overlap_tokens >= self.max_tokens {
            return Err("overlap_tokens must be smaller than max_tokens".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub parent: ItemId,
    pub text: String,
    pub position: usize,
}

/// Splits `text` into windows of at most `max_tokens` words, consecutive
/// windows sharing `overlap_tokens` words. Whitespace inside a chunk is
/// collapsed to single spaces.
pub fn chunk_text(text: &str, config: ChunkConfig) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Vec::new();
    }
    let stride = config.max_tokens.saturating_sub(config.overlap_tokens).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.max_tokens).min(words.len());
        out.push(words[start..end].join(" "));
        if end == words.len() {
            break;
        }
        start += stride;
    }
    out
}
