//! Shared service state and the operations behind the HTTP handlers.
//!
//! The desk and event log live behind one mutex so that every change is
//! logged in the order it was applied. Provider calls never run under that
//! lock: they go to the blocking pool, and `#reply` generation is further
//! serialised per thread.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use draftdesk::config::{Config, ConfigError};
use draftdesk::desk::{Action, HelpEntry, ReplyPlan};
use draftdesk::drafting::{Draft, DraftId};
use draftdesk::forum::{render_comment, CommentId, RenderedEntry, ThreadId, UserRef};
use draftdesk::provider::{ProviderError, Providers};
use draftdesk::retrieval::{Category, CorpusItem};
use draftdesk::transcript::{
    CommentPayload, DecisionPayload, DraftPayload, EditPayload, EventRecord, EventType, IngestPayload, RegisterPayload,
    ThreadPayload,
};
use draftdesk::{Desk, DeskError, ValidatedCommand};

use crate::error::ApiError;
use crate::journal::{Journal, JournalError};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("provider setup failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("user registration failed: {0}")]
    Users(#[from] DeskError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Succeeded,
    Failed,
}

/// A background `#reply` generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub job_id: u64,
    pub thread_id: ThreadId,
    pub command_comment: CommentId,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draft_id: Option<DraftId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
}

pub struct Inner {
    pub desk: Desk,
    pub journal: Journal,
}

impl Inner {
    /// Logs a record for a change that has already been applied.
    fn log(&mut self, record: EventRecord) -> Result<(), ApiError> {
        self.journal.append(&record)?;
        self.journal.maybe_snapshot(&self.desk)?;
        Ok(())
    }
}

pub struct AppState {
    inner: Mutex<Inner>,
    tokens: HashMap<String, UserRef>,
    providers: Providers,
    jobs: Mutex<BTreeMap<u64, Job>>,
    thread_locks: Mutex<HashMap<ThreadId, Arc<tokio::sync::Mutex<()>>>>,
    ingest_lock: tokio::sync::Mutex<()>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("users", &self.tokens.len())
            .field("providers", &self.providers)
            .finish()
    }
}

/// What posting a comment did.
#[derive(Debug, Clone, Serialize)]
pub struct CommentOutcome {
    pub comment: RenderedEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<ValidatedCommand>,
    /// `none`, `help` or `reply`.
    pub action: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub help: Option<HelpEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub job: Option<Job>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draft: Option<Draft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryCount {
    pub category: Category,
    pub items: usize,
    pub chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub chunks_stored: usize,
    pub totals: Vec<CategoryCount>,
}

fn key(thread: ThreadId) -> String {
    thread.0.to_string()
}

fn blocking_failed(e: tokio::task::JoinError) -> ApiError {
    ApiError::Internal(format!("background task failed: {e}"))
}

impl AppState {
    /// Opens the data directory, replays its log and registers configured
    /// users. `seed` only affects the mock provider.
    pub fn open(config: &Config, seed: u64) -> Result<Arc<Self>, StartupError> {
        let providers = config.provider.build(seed)?;
        Self::open_with(config, providers)
    }

    /// [`AppState::open`] with explicit providers.
    pub fn open_with(config: &Config, providers: Providers) -> Result<Arc<Self>, StartupError> {
        config.validate()?;
        let (journal, desk) = crate::journal::Journal::open(
            &config.server.data_dir,
            config.server.snapshot_every,
            config.desk_config(),
            config.store,
        )?;
        let mut inner = Inner { desk, journal };
        let now = Utc::now();
        for u in &config.users {
            let user = u.user_ref();
            if inner.desk.forum().user(&user.user_id).is_ok() {
                inner.desk.forum_mut().register_user(user).map_err(DeskError::from)?;
                continue;
            }
            inner
                .desk
                .forum_mut()
                .register_user(user.clone())
                .map_err(DeskError::from)?;
            inner.journal.append(
                &EventRecord::new(EventType::Register, now)
                    .actor(user.user_id.as_str())
                    .payload(RegisterPayload { role: user.role }),
            )?;
        }
        let tokens = config.users.iter().map(|u| (u.token.clone(), u.user_ref())).collect();
        Ok(Arc::new(AppState {
            inner: Mutex::new(inner),
            tokens,
            providers,
            jobs: Mutex::new(BTreeMap::new()),
            thread_locks: Mutex::new(HashMap::new()),
            ingest_lock: tokio::sync::Mutex::new(()),
        }))
    }

    pub fn authenticate(&self, token: &str) -> Option<&UserRef> {
        self.tokens.get(token)
    }

    /// Locks the desk and log. Never hold the guard across an await.
    pub fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn thread_lock(&self, thread: ThreadId) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.thread_locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(thread).or_default().clone()
    }

    pub fn job(&self, id: u64) -> Option<Job> {
        self.jobs.lock().unwrap_or_else(|p| p.into_inner()).get(&id).cloned()
    }

    pub fn pending_jobs(&self, thread: ThreadId) -> Vec<Job> {
        self.jobs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .filter(|j| j.thread_id == thread && j.status == JobStatus::Pending)
            .cloned()
            .collect()
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut Job)) -> Option<Job> {
        let mut jobs = self.jobs.lock().unwrap_or_else(|p| p.into_inner());
        let job = jobs.get_mut(&id)?;
        f(job);
        Some(job.clone())
    }

    fn new_job(&self, plan: &ReplyPlan) -> Job {
        let mut jobs = self.jobs.lock().unwrap_or_else(|p| p.into_inner());
        let job = Job {
            job_id: jobs.keys().next_back().map_or(1, |k| k + 1),
            thread_id: plan.thread_id,
            command_comment: plan.command_comment,
            status: JobStatus::Pending,
            draft_id: None,
            error: None,
            created_at: Utc::now(),
        };
        jobs.insert(job.job_id, job.clone());
        job
    }

    pub fn create_thread(&self, user: &UserRef, title: &str, body: &str) -> Result<ThreadId, ApiError> {
        let mut inner = self.lock();
        let now = Utc::now();
        let id = inner
            .desk
            .forum_mut()
            .create_thread(&user.user_id, title, body, now)
            .map_err(DeskError::from)?
            .thread_id;
        inner.log(
            EventRecord::new(EventType::Thread, now)
                .actor(user.user_id.as_str())
                .thread(key(id))
                .payload(ThreadPayload {
                    title: title.to_string(),
                    body: body.to_string(),
                }),
        )?;
        Ok(id)
    }

    /// Posts a comment and runs any command it carries. `#help` completes
    /// before returning; `#reply` starts a job, awaited only when `wait`.
    pub async fn post_comment(
        self: &Arc<Self>,
        user: &UserRef,
        thread: ThreadId,
        body: &str,
        anonymous: bool,
        wait: bool,
    ) -> Result<CommentOutcome, ApiError> {
        let (sub, question) = {
            let mut inner = self.lock();
            let now = Utc::now();
            let sub = inner.desk.submit_comment(thread, &user.user_id, body, anonymous, now)?;
            let question = inner
                .desk
                .forum()
                .thread(thread)
                .map_err(DeskError::from)?
                .question_text();
            inner.log(
                EventRecord::new(EventType::Comment, sub.comment.created_at)
                    .actor(user.user_id.as_str())
                    .thread(key(thread))
                    .payload(CommentPayload {
                        body: body.to_string(),
                        anonymous,
                        draft_text: None,
                        deferred: matches!(sub.action, Action::Reply(_)),
                    }),
            )?;
            (sub, question)
        };
        let mut outcome = CommentOutcome {
            comment: render_comment(&sub.comment, user),
            command: sub.command.clone(),
            action: "none",
            help: None,
            job: None,
            draft: None,
        };
        match sub.action {
            Action::None => {}
            Action::Help => {
                outcome.action = "help";
                outcome.help = Some(self.help(thread, sub.comment.comment_id, question).await?);
            }
            Action::Reply(plan) => {
                outcome.action = "reply";
                let job = self.new_job(&plan);
                let id = job.job_id;
                if wait {
                    let done = self.clone().run_job(id, plan).await;
                    outcome.job = self.job(id);
                    outcome.draft = Some(done?);
                } else {
                    outcome.job = Some(job);
                    let state = self.clone();
                    tokio::spawn(async move {
                        let _ = state.run_job(id, plan).await;
                    });
                }
            }
        }
        Ok(outcome)
    }

    async fn help(&self, thread: ThreadId, comment: CommentId, question: String) -> Result<HelpEntry, ApiError> {
        let embed = self.providers.embed.clone();
        let vectors = tokio::task::spawn_blocking(move || embed.embed_batch(&[question]))
            .await
            .map_err(blocking_failed)?
            .map_err(|e| ApiError::Provider(format!("retrieval failed: {e}; re-issue #help to try again")))?;
        let query = vectors
            .into_iter()
            .next()
            .ok_or_else(|| ApiError::Provider("provider returned no embedding".into()))?;
        let mut inner = self.lock();
        if let Some(d) = inner.desk.store().dimension() {
            if d != query.dimension() {
                return Err(ApiError::Provider(format!(
                    "query dimension {} does not match store dimension {d}",
                    query.dimension()
                )));
            }
        }
        let result = inner.desk.store().help_vector(&query);
        Ok(inner.desk.record_help(thread, comment, result)?.clone())
    }

    async fn run_job(self: Arc<Self>, id: u64, plan: ReplyPlan) -> Result<Draft, ApiError> {
        let result = self.generate(&plan).await;
        match &result {
            Ok(d) => {
                self.update_job(id, |j| {
                    j.status = JobStatus::Succeeded;
                    j.draft_id = Some(d.draft_id);
                });
                tracing::info!(job = id, draft = %d.draft_id, thread = %plan.thread_id, "draft ready");
            }
            Err(e) => {
                self.update_job(id, |j| {
                    j.status = JobStatus::Failed;
                    j.error = Some(e.to_string());
                });
                tracing::warn!(job = id, thread = %plan.thread_id, error = %e, "draft generation failed");
            }
        }
        result
    }

    async fn generate(&self, plan: &ReplyPlan) -> Result<Draft, ApiError> {
        let lock = self.thread_lock(plan.thread_id);
        let _turn = lock.lock().await;
        let chat = self.providers.chat.clone();
        let package = plan.package.clone();
        let (text, model) = tokio::task::spawn_blocking(move || {
            let text = chat.chat_complete(&package);
            (text, chat.model().to_string())
        })
        .await
        .map_err(blocking_failed)?;
        let text = text.map_err(|e| ApiError::from(DeskError::Provider(e)))?;
        let mut inner = self.lock();
        let draft = inner.desk.commit_draft(plan, &text, &model, Utc::now())?.clone();
        inner.log(
            EventRecord::new(EventType::Draft, draft.created_at)
                .thread(key(plan.thread_id))
                .payload(DraftPayload {
                    command: Some(plan.command_comment),
                    text: Some(text),
                    model: Some(model),
                }),
        )?;
        Ok(draft)
    }

    pub fn edit_draft(&self, user: &UserRef, id: DraftId, text: &str) -> Result<Draft, ApiError> {
        let mut inner = self.lock();
        let now = Utc::now();
        let before = inner.desk.draft(id)?.current_text.clone();
        let draft = inner.desk.edit_draft(id, text, now)?.clone();
        if draft.current_text != before {
            inner.log(
                EventRecord::new(EventType::Edit, now)
                    .actor(user.user_id.as_str())
                    .thread(key(draft.thread_id))
                    .payload(EditPayload {
                        draft: Some(id),
                        text: Some(text.to_string()),
                        ..EditPayload::default()
                    }),
            )?;
        }
        Ok(draft)
    }

    pub fn publish(&self, user: &UserRef, id: DraftId, anonymous: Option<bool>) -> Result<Draft, ApiError> {
        let mut inner = self.lock();
        let anonymous = match anonymous {
            Some(a) => a,
            None => inner.desk.draft(id)?.requested_anonymous,
        };
        let draft = inner.desk.publish(id, &user.user_id, anonymous, Utc::now())?.clone();
        let at = draft.publish.as_ref().map_or_else(Utc::now, |p| p.published_at);
        inner.log(
            EventRecord::new(EventType::Publish, at)
                .actor(user.user_id.as_str())
                .thread(key(draft.thread_id))
                .payload(DecisionPayload {
                    draft: Some(id),
                    anonymous: Some(anonymous),
                }),
        )?;
        Ok(draft)
    }

    pub fn discard(&self, user: &UserRef, id: DraftId) -> Result<Draft, ApiError> {
        let mut inner = self.lock();
        let draft = inner.desk.discard(id)?.clone();
        inner.log(
            EventRecord::new(EventType::Discard, Utc::now())
                .actor(user.user_id.as_str())
                .thread(key(draft.thread_id))
                .payload(DecisionPayload {
                    draft: Some(id),
                    anonymous: None,
                }),
        )?;
        Ok(draft)
    }

    /// Embeds and stores corpus items, then persists the store and logs the
    /// batch. Ingests run one at a time.
    pub async fn ingest(&self, items: Vec<CorpusItem>) -> Result<IngestSummary, ApiError> {
        if items.is_empty() {
            return Err(ApiError::Unprocessable("no items to ingest".into()));
        }
        let _one = self.ingest_lock.lock().await;
        let mut store = self.lock().desk.store().clone();
        let embed = self.providers.embed.clone();
        let batch = items.clone();
        let (store, stored) = tokio::task::spawn_blocking(move || {
            let n = store.ingest(batch, embed.as_ref());
            (store, n)
        })
        .await
        .map_err(blocking_failed)?;
        let stored = stored.map_err(DeskError::from)?;
        let mut inner = self.lock();
        inner.journal.save_vectors(&store)?;
        let totals = summarize(&store);
        inner.desk.set_store(store);
        inner.log(EventRecord::new(EventType::Ingest, Utc::now()).payload(IngestPayload { items }))?;
        Ok(IngestSummary {
            chunks_stored: stored,
            totals,
        })
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }
}

pub fn summarize(store: &draftdesk::retrieval::VectorStore) -> Vec<CategoryCount> {
    [Category::Previous, Category::Related]
        .into_iter()
        .map(|category| CategoryCount {
            category,
            items: store.category_len(category),
            chunks: store.chunk_count(category),
        })
        .collect()
}
