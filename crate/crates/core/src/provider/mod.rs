//! Chat-completion and embedding providers.
//!
//! Everything that talks to a language model goes through [`ChatProvider`]
//! or [`EmbeddingProvider`]. [`MockProvider`] is a deterministic offline
//! implementation of both; [`OpenAiCompatible`] speaks the common
//! `/chat/completions` + `/embeddings` JSON shape. Wrap either in
//! [`Retrying`] to get bounded retries with geometric backoff.

mod http;
mod mock;
mod retry;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drafting::PromptPackage;
use crate::retrieval::EmbeddingVector;

pub use http::OpenAiCompatible;
pub use mock::{fnv1a, MockProvider};
pub use retry::{
    call_with_retry, Attempt, RecordingSleeper, RetryOutcome, RetryPolicy, Retrying, Sleeper, ThreadSleeper,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider returned HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider configuration error: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ProviderError> },
}

impl ProviderError {
    /// Transient failures that a retry might fix.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Timeout | ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => matches!(status, 408 | 429 | 500..=599),
            _ => false,
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn model(&self) -> &str;

    /// One unit vector per text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

pub trait ChatProvider: Send + Sync {
    fn model(&self) -> &str;

    fn chat_complete(&self, package: &PromptPackage) -> Result<String, ProviderError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<T> {
    fn model(&self) -> &str {
        (**self).model()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed_batch(texts)
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for Arc<T> {
    fn model(&self) -> &str {
        (**self).model()
    }
    fn chat_complete(&self, package: &PromptPackage) -> Result<String, ProviderError> {
        (**self).chat_complete(package)
    }
}

/// Rejects empty batches and empty texts.
pub fn check_batch(texts: &[String]) -> Result<(), ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::Validation("embedding batch is empty".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::Validation(format!("text {i} in batch is empty")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    OpenAi,
}

/// Provider settings. Only the *name* of the credential variable is stored;
/// the key itself is read from the environment per request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub credential_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_concurrency: usize,
    /// Embedding dimension of the mock provider.
    pub mock_dimension: usize,
}

pub const DEFAULT_CREDENTIAL_ENV: &str = "DRAFTDESK_API_KEY";

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: "https://api.openai.com/v1".into(),
            chat_model: "gpt-4".into(),
            embedding_model: "text-embedding-3-small".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            timeout_secs: 60,
            max_retries: 3,
            backoff_base_ms: 500,
            max_concurrency: 4,
            mock_dimension: 256,
        }
    }
}

impl ProviderConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff_base: Duration::from_millis(self.backoff_base_ms),
            factor: 2,
        }
    }

    /// Builds the configured chat and embedding providers.
    pub fn build(&self, seed: u64) -> Result<Providers, ProviderError> {
        match self.kind {
            ProviderKind::Mock => {
                if self.mock_dimension == 0 {
                    return Err(ProviderError::Config("mock_dimension must be positive".into()));
                }
                let mock = Arc::new(MockProvider::new(seed, self.mock_dimension));
                Ok(Providers {
                    chat: mock.clone(),
                    embed: mock,
                })
            }
            ProviderKind::OpenAi => {
                let client = Arc::new(OpenAiCompatible::new(self.clone())?);
                let sleeper: Arc<dyn Sleeper> = Arc::new(ThreadSleeper);
                Ok(Providers {
                    chat: Arc::new(Retrying::new(client.clone(), self.retry_policy(), sleeper.clone())),
                    embed: Arc::new(Retrying::new(client, self.retry_policy(), sleeper)),
                })
            }
        }
    }
}

#[derive(Clone)]
pub struct Providers {
    pub chat: Arc<dyn ChatProvider>,
    pub embed: Arc<dyn EmbeddingProvider>,
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers")
            .field("chat", &self.chat.model())
            .field("embed", &self.embed.model())
            .finish()
    }
}
