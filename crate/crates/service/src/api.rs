//! The `/v1` HTTP+JSON API.
//!
//! | method | path | who |
//! |--------|------|-----|
//! | GET | `/v1/health` | anyone |
//! | GET, POST | `/v1/threads` | any user |
//! | GET | `/v1/threads/{id}` | any user; students get the filtered view |
//! | POST | `/v1/threads/{id}/comments[?wait=true]` | any user; only instructors' hashtags act |
//! | GET | `/v1/threads/{id}/help` | instructor |
//! | GET | `/v1/threads/{id}/drafts` | instructor |
//! | GET, PUT | `/v1/drafts/{id}` | instructor |
//! | GET | `/v1/drafts/{id}/diff` | instructor |
//! | POST | `/v1/drafts/{id}/publish`, `/v1/drafts/{id}/discard` | instructor |
//! | GET | `/v1/jobs/{id}` | instructor |
//! | POST | `/v1/corpus` | instructor |
//! | GET | `/v1/analytics/usage`, `/edits`, `/adoption` | instructor |
//!
//! Every route except health needs `Authorization: Bearer <token>`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use draftdesk::analytics::{diff_edits, format_percent, word_diff, AdoptionStats, EditMetrics, EditSeries, WordOp};
use draftdesk::drafting::{Draft, DraftId};
use draftdesk::forum::{PostKind, RenderedThread, ThreadId, UserRef};
use draftdesk::retrieval::CorpusItem;
use draftdesk::DeskError;

use crate::error::ApiError;
use crate::state::{AppState, IngestSummary, Job};

/// The authenticated caller.
#[derive(Debug, Clone)]
pub struct Caller(pub UserRef);

impl Caller {
    fn instructor(&self) -> Result<&UserRef, ApiError> {
        if self.0.is_instructor() {
            Ok(&self.0)
        } else {
            Err(ApiError::forbidden_for_students())
        }
    }
}

impl FromRequestParts<Arc<AppState>> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Unauthorized)?;
        state
            .authenticate(token.trim())
            .cloned()
            .map(Caller)
            .ok_or(ApiError::Unauthorized)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/threads", get(list_threads).post(create_thread))
        .route("/v1/threads/{id}", get(view_thread))
        .route("/v1/threads/{id}/comments", post(post_comment))
        .route("/v1/threads/{id}/help", get(latest_help))
        .route("/v1/threads/{id}/drafts", get(thread_drafts))
        .route("/v1/drafts/{id}", get(get_draft).put(edit_draft))
        .route("/v1/drafts/{id}/diff", get(draft_diff))
        .route("/v1/drafts/{id}/publish", post(publish_draft))
        .route("/v1/drafts/{id}/discard", post(discard_draft))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/corpus", post(ingest))
        .route("/v1/analytics/usage", get(usage))
        .route("/v1/analytics/edits", get(edits))
        .route("/v1/analytics/adoption", get(adoption))
        .layer(middleware::from_fn(trace_requests))
        .with_state(state)
}

async fn trace_requests(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let res = next.run(req).await;
    tracing::info!(%method, %path, status = res.status().as_u16(), "request");
    res
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize)]
struct ThreadSummary {
    thread_id: ThreadId,
    title: String,
    author: String,
    created_at: DateTime<Utc>,
    /// Comments visible to the caller.
    comments: usize,
    answered: bool,
}

async fn list_threads(State(state): State<Arc<AppState>>, caller: Caller) -> Json<Vec<ThreadSummary>> {
    let inner = state.lock();
    let forum = inner.desk.forum();
    let list = forum
        .threads()
        .map(|t| {
            let view = draftdesk::forum::render_thread(t, &caller.0);
            ThreadSummary {
                thread_id: t.thread_id,
                title: view.title,
                author: view.question.display_name,
                created_at: t.created_at,
                comments: view.comments.len(),
                answered: t.comments.iter().any(|c| c.kind == PostKind::PublishedAnswer),
            }
        })
        .collect();
    Json(list)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewThread {
    title: String,
    body: String,
}

async fn create_thread(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Json(req): Json<NewThread>,
) -> Result<(StatusCode, Json<RenderedThread>), ApiError> {
    let id = state.create_thread(&caller.0, &req.title, &req.body)?;
    let view = state
        .lock()
        .desk
        .forum()
        .render_view(id, &caller.0)
        .map_err(DeskError::from)?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Serialize)]
struct ThreadView {
    #[serde(flatten)]
    thread: RenderedThread,
    /// Instructors only: `#reply` generations still running.
    #[serde(skip_serializing_if = "Option::is_none")]
    pending: Option<Vec<Job>>,
    /// Instructors only.
    #[serde(skip_serializing_if = "Option::is_none")]
    drafts: Option<Vec<Draft>>,
}

async fn view_thread(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<ThreadView>, ApiError> {
    let id = ThreadId(id);
    let (thread, drafts) = {
        let inner = state.lock();
        let thread = inner.desk.forum().render_view(id, &caller.0).map_err(DeskError::from)?;
        let drafts: Vec<Draft> = inner.desk.thread_drafts(id).cloned().collect();
        (thread, drafts)
    };
    let view = if caller.0.is_instructor() {
        ThreadView {
            thread,
            pending: Some(state.pending_jobs(id)),
            drafts: Some(drafts),
        }
    } else {
        ThreadView {
            thread,
            pending: None,
            drafts: None,
        }
    };
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewComment {
    body: String,
    #[serde(default)]
    anonymous: bool,
}

#[derive(Debug, Deserialize, Default)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

async fn post_comment(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
    Query(q): Query<WaitQuery>,
    Json(req): Json<NewComment>,
) -> Result<Response, ApiError> {
    let outcome = state
        .post_comment(&caller.0, ThreadId(id), &req.body, req.anonymous, q.wait)
        .await?;
    let status = if outcome.action == "reply" && outcome.draft.is_none() {
        StatusCode::ACCEPTED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(outcome)).into_response())
}

async fn latest_help(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<Value>, ApiError> {
    caller.instructor()?;
    let inner = state.lock();
    inner.desk.forum().thread(ThreadId(id)).map_err(DeskError::from)?;
    let entry = inner
        .desk
        .latest_help(ThreadId(id))
        .ok_or_else(|| ApiError::NotFound(format!("no #help result for thread {id}")))?;
    let text = entry.result.render(inner.desk.store());
    Ok(Json(json!({
        "command_comment": entry.command_comment,
        "result": entry.result,
        "text": text,
    })))
}

async fn thread_drafts(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<Vec<Draft>>, ApiError> {
    caller.instructor()?;
    let inner = state.lock();
    inner.desk.forum().thread(ThreadId(id)).map_err(DeskError::from)?;
    Ok(Json(inner.desk.thread_drafts(ThreadId(id)).cloned().collect()))
}

async fn get_draft(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<Draft>, ApiError> {
    caller.instructor()?;
    Ok(Json(state.lock().desk.draft(DraftId(id))?.clone()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DraftEdit {
    text: String,
}

async fn edit_draft(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
    Json(req): Json<DraftEdit>,
) -> Result<Json<Draft>, ApiError> {
    let user = caller.instructor()?;
    Ok(Json(state.edit_draft(user, DraftId(id), &req.text)?))
}

#[derive(Debug, Serialize)]
struct DraftDiff {
    draft_id: DraftId,
    generated_text: String,
    current_text: String,
    #[serde(flatten)]
    metrics: EditMetrics,
    ops: Vec<WordOp>,
}

async fn draft_diff(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<DraftDiff>, ApiError> {
    caller.instructor()?;
    let draft = state.lock().desk.draft(DraftId(id))?.clone();
    Ok(Json(DraftDiff {
        draft_id: draft.draft_id,
        metrics: diff_edits(draft.generated_text(), &draft.current_text),
        ops: word_diff(draft.generated_text(), &draft.current_text),
        generated_text: draft.generated_text().to_string(),
        current_text: draft.current_text,
    }))
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PublishRequest {
    #[serde(default)]
    anonymous: Option<bool>,
}

async fn publish_draft(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<Draft>, ApiError> {
    let user = caller.instructor()?;
    // an empty body means "use the defaults", whatever the content type says
    let req: PublishRequest = if body.trim_ascii().is_empty() {
        PublishRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(format!("invalid publish body: {e}")))?
    };
    Ok(Json(state.publish(user, DraftId(id), req.anonymous)?))
}

async fn discard_draft(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<Draft>, ApiError> {
    let user = caller.instructor()?;
    Ok(Json(state.discard(user, DraftId(id))?))
}

async fn get_job(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Path(id): Path<u64>,
) -> Result<Json<Job>, ApiError> {
    caller.instructor()?;
    state
        .job(id)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("job {id} not found")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestRequest {
    items: Vec<CorpusItem>,
}

async fn ingest(
    State(state): State<Arc<AppState>>,
    caller: Caller,
    Json(req): Json<IngestRequest>,
) -> Result<Json<IngestSummary>, ApiError> {
    caller.instructor()?;
    Ok(Json(state.ingest(req.items).await?))
}

#[derive(Debug, Serialize)]
struct UsageRowView {
    label: String,
    count: usize,
    proportion: f64,
    display: String,
}

async fn usage(State(state): State<Arc<AppState>>, caller: Caller) -> Result<Json<Value>, ApiError> {
    caller.instructor()?;
    let report = state.lock().desk.usage_report();
    let rows: Vec<UsageRowView> = report
        .rows
        .iter()
        .map(|r| UsageRowView {
            label: r.label.to_string(),
            count: r.count,
            proportion: r.proportion,
            display: format_percent(r.proportion),
        })
        .collect();
    Ok(Json(json!({
        "rows": rows,
        "total": report.total,
        "table": report.render_table(),
    })))
}

async fn edits(State(state): State<Arc<AppState>>, caller: Caller) -> Result<Json<EditSeries>, ApiError> {
    caller.instructor()?;
    Ok(Json(state.lock().desk.edit_series()))
}

async fn adoption(State(state): State<Arc<AppState>>, caller: Caller) -> Result<Json<AdoptionStats>, ApiError> {
    caller.instructor()?;
    Ok(Json(state.lock().desk.adoption()))
}
