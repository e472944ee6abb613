//! HTTP service and operator CLI for a draftdesk course forum.
//!
//! [`AppState`] owns the desk, its event log and the providers; [`router`]
//! exposes them under `/v1`; [`cli`] implements the `draftdesk` binary.

pub mod api;
pub mod cli;
pub mod error;
pub mod journal;
pub mod state;

use std::sync::Arc;

use draftdesk::Config;

pub use api::router;
pub use error::ApiError;
pub use journal::{Journal, JournalError};
pub use state::{AppState, Job, JobStatus, StartupError};

/// Binds `addr` (or the configured address) and serves until Ctrl-C.
pub async fn serve(config: &Config, seed: u64, addr: Option<&str>) -> Result<(), StartupError> {
    let state = AppState::open(config, seed)?;
    let addr = addr.unwrap_or(&config.server.addr).to_string();
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| StartupError::Bind {
            addr: addr.clone(),
            source,
        })?;
    let local = listener.local_addr().map_err(StartupError::Serve)?;
    tracing::info!(addr = %local, data_dir = %config.server.data_dir.display(), "listening");
    serve_on(listener, state).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> Result<(), StartupError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(StartupError::Serve)
}
