//! TOML configuration.
//!
//! ```toml
//! [server]
//! addr = "127.0.0.1:8080"
//! data_dir = "data"
//! snapshot_every = 200
//!
//! [provider]
//! kind = "mock"            # or "openai"
//! endpoint = "https://api.openai.com/v1"
//! credential_env = "DRAFTDESK_API_KEY"
//!
//! [store]
//! max_tokens = 800
//! overlap_tokens = 100
//! help_k = 5
//!
//! [forum]
//! alias_seed = 0
//!
//! [drafting]
//! token_budget = 6000
//!
//! [[users]]
//! id = "I1"
//! role = "instructor"
//! token = "..."
//! ```
//!
//! Every section is optional.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::desk::DeskConfig;
use crate::drafting::DraftingConfig;
use crate::forum::{ForumConfig, Role, UserId, UserRef};
use crate::provider::ProviderConfig;
use crate::retrieval::{ChunkConfig, VectorStore};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub addr: String,
    pub data_dir: PathBuf,
    /// Events between snapshots.
    pub snapshot_every: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            addr: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            snapshot_every: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
    pub help_k: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        let c = ChunkConfig::default();
        StoreConfig {
            max_tokens: c.max_tokens,
            overlap_tokens: c.overlap_tokens,
            help_k: 5,
        }
    }
}

impl StoreConfig {
    pub fn chunking(&self) -> ChunkConfig {
        ChunkConfig {
            max_tokens: self.max_tokens,
            overlap_tokens: self.overlap_tokens,
        }
    }

    pub fn empty_store(&self) -> VectorStore {
        VectorStore::new(self.chunking()).with_help_k(self.help_k)
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub id: String,
    pub role: Role,
    #[serde(skip_serializing)]
    pub token: String,
}

impl fmt::Debug for UserEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserEntry")
            .field("id", &self.id)
            .field("role", &self.role)
            .field("token", &"<redacted>")
            .finish()
    }
}

impl UserEntry {
    pub fn user_ref(&self) -> UserRef {
        UserRef {
            user_id: UserId::new(self.id.clone()),
            role: self.role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub provider: ProviderConfig,
    pub store: StoreConfig,
    pub forum: ForumConfig,
    pub drafting: DraftingConfig,
    pub users: Vec<UserEntry>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.store.chunking().validate().map_err(ConfigError::Invalid)?;
        if self.store.help_k == 0 {
            return bad("store.help_k must be at least 1".into());
        }
        if self.drafting.token_budget == 0 {
            return bad("drafting.token_budget must be positive".into());
        }
        if self.forum.alias_words.is_empty() {
            return bad("forum.alias_words is empty".into());
        }
        let words: BTreeSet<&str> = self.forum.alias_words.iter().map(String::as_str).collect();
        if words.len() != self.forum.alias_words.len() {
            return bad("forum.alias_words contains duplicates".into());
        }
        if self.provider.credential_env.trim().is_empty() {
            return bad("provider.credential_env is empty".into());
        }
        let mut ids = BTreeSet::new();
        let mut tokens = BTreeSet::new();
        for u in &self.users {
            if u.id.trim().is_empty() || u.token.trim().is_empty() {
                return bad("users need a non-empty id and token".into());
            }
            if u.id == crate::forum::ASSISTANT_ID {
                return bad(format!("user id {:?} is reserved", u.id));
            }
            if !ids.insert(u.id.as_str()) {
                return bad(format!("duplicate user id {:?}", u.id));
            }
            if !tokens.insert(u.token.as_str()) {
                return bad(format!("user {:?} reuses another user's token", u.id));
            }
        }
        Ok(())
    }

    pub fn desk_config(&self) -> DeskConfig {
        DeskConfig {
            forum: self.forum.clone(),
            drafting: self.drafting.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.store.chunking(), ChunkConfig::default());
        assert_eq!(c.store.help_k, 5);
    }

    #[test]
    fn full_example() {
        let c = Config::from_toml(
            r#"
            [server]
            addr = "0.0.0.0:9000"
            [provider]
            kind = "openai"
            endpoint = "http://localhost:11434/v1"
            [store]
            max_tokens = 400
            overlap_tokens = 50
            [forum]
            alias_words = ["Kangaroo", "Goose"]
            alias_seed = 9
            [drafting]
            token_budget = 3000
            [[users]]
            id = "I1"
            role = "instructor"
            token = "secret-i1"
            [[users]]
            id = "S1"
            role = "student"
            token = "secret-s1"
            "#,
        )
        .unwrap();
        assert_eq!(c.server.addr, "0.0.0.0:9000");
        assert_eq!(c.users.len(), 2);
        assert_eq!(c.forum.alias_words.len(), 2);
        assert!(!format!("{c:?}").contains("secret-i1"));
        assert!(!serde_json::to_string(&c).unwrap().contains("secret-i1"));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[store]\nmax_tokens = 100\noverlap_tokens = 100",
            "[store]\nhelp_k = 0",
            "[forum]\nalias_words = []",
            "[forum]\nalias_words = [\"A\", \"A\"]",
            "[[users]]\nid = \"a\"\nrole = \"student\"\ntoken = \"t\"\n[[users]]\nid = \"b\"\nrole = \"student\"\ntoken = \"t\"",
            "[[users]]\nid = \"assistant\"\nrole = \"instructor\"\ntoken = \"t\"",
            "[nonsense]\nx = 1",
        ] {
            assert!(Config::from_toml(text).is_err(), "{text}");
        }
    }
}
