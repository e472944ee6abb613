//! Durable state: an append-only event log, a periodic desk snapshot and
//! the vector store file.
//!
//! ```text
//! <data_dir>/events.jsonl    one transcript record per line, never rewritten
//! <data_dir>/snapshot.json   {"events": n, "desk": {...}} covering the first n lines
//! <data_dir>/vectors.jsonl   the vector store, rewritten after every ingest
//! ```
//!
//! Recovery loads the snapshot and vector store, then re-applies the log
//! lines after the snapshot without calling any provider. Drafts come back
//! from the text recorded in `draft` events.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use draftdesk::config::StoreConfig;
use draftdesk::desk::DeskConfig;
use draftdesk::retrieval::{RetrievalError, VectorStore};
use draftdesk::transcript::{parse_transcript, Applier, EventRecord, TranscriptError};
use draftdesk::Desk;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const VECTORS_FILE: &str = "vectors.jsonl";

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Snapshot { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Log {
        path: PathBuf,
        #[source]
        source: TranscriptError,
    },
    #[error("{}: {source}", path.display())]
    Vectors {
        path: PathBuf,
        #[source]
        source: RetrievalError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> JournalError + '_ {
    move |source| JournalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Deserialize)]
struct Snapshot {
    events: usize,
    desk: Desk,
}

pub struct Journal {
    dir: PathBuf,
    log: BufWriter<File>,
    events: usize,
    since_snapshot: usize,
    snapshot_every: usize,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal")
            .field("dir", &self.dir)
            .field("events", &self.events)
            .finish()
    }
}

impl Journal {
    /// Opens (or creates) `dir` and rebuilds the desk it describes.
    pub fn open(
        dir: &Path,
        snapshot_every: usize,
        desk_config: DeskConfig,
        store_config: StoreConfig,
    ) -> Result<(Journal, Desk), JournalError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let vectors = dir.join(VECTORS_FILE);
        let store = if vectors.exists() {
            VectorStore::load(&vectors)
                .map_err(|source| JournalError::Vectors {
                    path: vectors.clone(),
                    source,
                })?
                .with_help_k(store_config.help_k)
        } else {
            store_config.empty_store()
        };

        let snap_path = dir.join(SNAPSHOT_FILE);
        let (mut desk, skip) = if snap_path.exists() {
            let text = fs::read_to_string(&snap_path).map_err(io_err(&snap_path))?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| JournalError::Snapshot {
                path: snap_path.clone(),
                message: e.to_string(),
            })?;
            (snap.desk, snap.events)
        } else {
            (Desk::new(desk_config.clone(), VectorStore::default()), 0)
        };
        desk.set_drafting_config(desk_config.drafting);

        let log_path = dir.join(EVENTS_FILE);
        let text = if log_path.exists() {
            fs::read_to_string(&log_path).map_err(io_err(&log_path))?
        } else {
            String::new()
        };
        let log_err = |source| JournalError::Log {
            path: log_path.clone(),
            source,
        };
        let records = parse_transcript(&text).map_err(log_err)?;
        let total = records.len();
        if skip > total {
            return Err(JournalError::Snapshot {
                path: snap_path,
                message: format!("snapshot covers {skip} events but the log has {total}"),
            });
        }
        desk.set_store(store);
        Applier::new(&mut desk, None, None)
            .apply_all(&records[skip..])
            .map_err(log_err)?;

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let journal = Journal {
            dir: dir.to_path_buf(),
            log: BufWriter::new(file),
            events: total,
            since_snapshot: total - skip,
            snapshot_every: snapshot_every.max(1),
        };
        Ok((journal, desk))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Events written so far, including those recovered at open.
    pub fn len(&self) -> usize {
        self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events == 0
    }

    /// Appends one record and flushes it.
    pub fn append(&mut self, record: &EventRecord) -> Result<(), JournalError> {
        let path = self.dir.join(EVENTS_FILE);
        writeln!(self.log, "{}", record.to_line()).map_err(io_err(&path))?;
        self.log.flush().map_err(io_err(&path))?;
        self.events += 1;
        self.since_snapshot += 1;
        Ok(())
    }

    /// Writes a snapshot once enough events have accumulated.
    pub fn maybe_snapshot(&mut self, desk: &Desk) -> Result<bool, JournalError> {
        if self.since_snapshot < self.snapshot_every {
            return Ok(false);
        }
        self.snapshot(desk)?;
        Ok(true)
    }

    pub fn snapshot(&mut self, desk: &Desk) -> Result<(), JournalError> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = path.with_extension("tmp");
        let snap = serde_json::json!({ "events": self.events, "desk": desk });
        fs::write(&tmp, serde_json::to_vec(&snap).expect("desk serialises")).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn save_vectors(&self, store: &VectorStore) -> Result<(), JournalError> {
        let path = self.dir.join(VECTORS_FILE);
        store
            .save(&path)
            .map_err(|source| JournalError::Vectors { path, source })
    }
}
