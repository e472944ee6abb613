//! HTTP error mapping.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

use draftdesk::command::CommandError;
use draftdesk::drafting::DraftError;
use draftdesk::forum::ForumError;
use draftdesk::retrieval::RetrievalError;
use draftdesk::DeskError;

use crate::journal::JournalError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Command(#[from] CommandError),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Command(_) | ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Provider(_) => StatusCode::BAD_GATEWAY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "unauthorized",
            ApiError::Forbidden(_) => "forbidden",
            ApiError::NotFound(_) => "not_found",
            ApiError::Command(CommandError::OrphanModifier(_)) => "orphan_modifier",
            ApiError::Command(CommandError::HelpExclusive) => "help_exclusive",
            ApiError::Command(CommandError::DuplicatePrompt(_)) => "duplicate_prompt",
            ApiError::Command(CommandError::MissingContextIds(_)) => "missing_context_ids",
            ApiError::Unprocessable(_) => "invalid_request",
            ApiError::Conflict(_) => "conflict",
            ApiError::Provider(_) => "provider_error",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn forbidden_for_students() -> Self {
        ApiError::Forbidden("instructor role required".into())
    }
}

impl From<DeskError> for ApiError {
    fn from(e: DeskError) -> Self {
        let message = e.to_string();
        match e {
            DeskError::Command(c) => ApiError::Command(c),
            DeskError::Forum(ForumError::ThreadNotFound(_) | ForumError::CommentNotFound(_))
            | DeskError::DraftNotFound(_) => ApiError::NotFound(message),
            DeskError::Forum(ForumError::UnknownUser(_)) | DeskError::NotInstructor(_) => ApiError::Forbidden(message),
            DeskError::Forum(ForumError::RoleConflict(_) | ForumError::AliasCapacity(_)) => ApiError::Conflict(message),
            DeskError::Forum(ForumError::Validation(_)) => ApiError::Unprocessable(message),
            DeskError::Draft(DraftError::InvalidTransition { .. }) => ApiError::Conflict(message),
            DeskError::Draft(DraftError::Validation(_)) => ApiError::Unprocessable(message),
            DeskError::Retrieval(
                RetrievalError::UnknownIds(_) | RetrievalError::CategoryMismatch { .. } | RetrievalError::Validation(_),
            ) => ApiError::Unprocessable(message),
            DeskError::Retrieval(RetrievalError::Provider(_) | RetrievalError::Ingest { .. })
            | DeskError::Provider(_) => ApiError::Provider(message),
            DeskError::Retrieval(_) => ApiError::Internal(message),
        }
    }
}

impl From<JournalError> for ApiError {
    fn from(e: JournalError) -> Self {
        tracing::error!(error = %e, "event log write failed");
        ApiError::Internal(format!("persistence failed: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ApiError::Command(c) = &self {
            body["hashtag"] = json!(c.hashtag().as_str());
        }
        (self.status(), Json(body)).into_response()
    }
}
