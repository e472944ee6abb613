//! The `draftdesk` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 bad input (config, corpus,
//! transcript or log), 4 provider failure, 1 anything else.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use thiserror::Error;

use draftdesk::replay::{replay, ReplayOptions};
use draftdesk::retrieval::corpus::{read_material, read_records, CorpusError};
use draftdesk::retrieval::{Category, CorpusItem, RetrievalError};
use draftdesk::transcript::{EventRecord, EventType, IngestPayload, TranscriptError};
use draftdesk::Config;

use crate::journal::{Journal, JournalError};
use crate::state::{summarize, StartupError};

#[derive(Debug, Parser)]
#[command(
    name = "draftdesk",
    version,
    about = "Instructor-moderated drafting assistant for course forums"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `server.addr`.
        #[arg(long)]
        addr: Option<String>,
        /// Seed of the mock provider.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chunk, embed and store previous posts and course material.
    Ingest {
        /// Line-delimited archive of previous posts.
        #[arg(long)]
        previous: PathBuf,
        /// Directory holding course material files.
        #[arg(long)]
        related: PathBuf,
        /// Line-delimited manifest assigning ids to material files.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-execute a transcript with the mock provider and print all reports.
    Replay {
        transcript: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit line-delimited JSON records instead of text.
        #[arg(long)]
        jsonl: bool,
    },
    /// Print one report from an event log.
    #[command(group(ArgGroup::new("report").required(true).args(["usage", "edits"])))]
    Report {
        /// Usage of each hashtag combination.
        #[arg(long)]
        usage: bool,
        /// Word edits made to adopted drafts.
        #[arg(long)]
        edits: bool,
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TranscriptError> for CliError {
    fn from(e: TranscriptError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<JournalError> for CliError {
    fn from(e: JournalError) -> Self {
        match e {
            JournalError::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Provider(_) | RetrievalError::Ingest { .. } => CliError::Provider(e.to_string()),
            RetrievalError::Io(_) => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<StartupError> for CliError {
    fn from(e: StartupError) -> Self {
        match e {
            StartupError::Config(_) | StartupError::Journal(_) | StartupError::Users(_) => {
                CliError::Input(e.to_string())
            }
            StartupError::Provider(_) => CliError::Provider(e.to_string()),
            StartupError::Bind { .. } | StartupError::Serve(_) => CliError::Other(e.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p).map_err(|e| CliError::Input(e.to_string())),
        None => Ok(Config::default()),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Parses `args` and runs the command, writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(RunError::Usage)?;
    execute(cli.command, out).map_err(RunError::Failed)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("error: {0}")]
    Failed(CliError),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(e) => e.exit_code() as u8,
            RunError::Failed(e) => e.exit_code(),
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match command {
        Command::Serve { config, addr, seed } => {
            let config = load_config(config.as_deref())?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
            runtime.block_on(crate::serve(&config, seed, addr.as_deref()))?;
            String::new()
        }
        Command::Ingest {
            previous,
            related,
            manifest,
            config,
            seed,
        } => ingest(&load_config(config.as_deref())?, seed, &previous, &related, &manifest)?,
        Command::Replay {
            transcript,
            seed,
            jsonl,
        } => {
            let report = replay(&read_text(&transcript)?, &ReplayOptions::with_seed(seed))?;
            if jsonl {
                report.render_jsonl()
            } else {
                report.render_text()
            }
        }
        Command::Report {
            usage,
            edits: _,
            from,
            seed,
        } => {
            let report = replay(&read_text(&from)?, &ReplayOptions::with_seed(seed))?;
            if usage {
                report.usage.render_table()
            } else {
                report.edits.render_table()
            }
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Other(e.to_string()))
}

fn ingest(config: &Config, seed: u64, previous: &Path, related: &Path, manifest: &Path) -> Result<String, CliError> {
    let archive = read_records(previous)?;
    if let Some(item) = archive.iter().find(|i| i.category != Category::Previous) {
        return Err(CliError::Input(format!(
            "{}: item {} has category {}, expected previous",
            previous.display(),
            item.item_id,
            item.category
        )));
    }
    let material = read_material(related, manifest)?;
    let providers = config
        .provider
        .build(seed)
        .map_err(|e| CliError::Provider(e.to_string()))?;
    let (mut journal, mut desk) = Journal::open(
        &config.server.data_dir,
        config.server.snapshot_every,
        config.desk_config(),
        config.store,
    )?;
    let now = chrono::Utc::now();
    for batch in [archive, material] {
        if batch.is_empty() {
            continue;
        }
        desk.store_mut().ingest(batch.clone(), providers.embed.as_ref())?;
        journal.save_vectors(desk.store())?;
        journal.append(&EventRecord::new(EventType::Ingest, now).payload(IngestPayload { items: batch }))?;
    }
    journal.maybe_snapshot(&desk)?;

    let store = desk.store();
    let mut text = format!("{:<10}  {:>6}  {:>6}\n", "category", "items", "chunks");
    for c in summarize(store) {
        let _ = writeln!(text, "{:<10}  {:>6}  {:>6}", c.category.as_str(), c.items, c.chunks);
    }
    let stored: Vec<&CorpusItem> = store.items().filter(|i| i.category == Category::Previous).collect();
    let _ = writeln!(
        text,
        "answered via tool: {}",
        stored.iter().filter(|i| i.answered_via_tool).count()
    );
    let _ = writeln!(text, "unanswered: {}", stored.iter().filter(|i| i.unanswered).count());
    Ok(text)
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let wants_logs = std::env::args().nth(1).as_deref() == Some("serve");
    if wants_logs {
        tracing_subscriber::fmt()
            .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
            .with_writer(std::io::stderr)
            .init();
    }
    let mut stdout = std::io::stdout().lock();
    match run(std::env::args_os(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
