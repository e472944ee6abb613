//! Line-delimited event records and their application to a [`Desk`].
//!
//! Every line is one JSON object `{type, actor, thread, payload, time}`:
//!
//! | type | actor | payload |
//! |------|-------|---------|
//! | `register` | user id | `{role}` |
//! | `ingest` | - | `{items: [CorpusItem]}` |
//! | `thread` | author | `{title, body}` |
//! | `comment` | author | `{body, anonymous?, draft_text?, deferred?}` |
//! | `draft` | - | `{command?, text?, model?}` |
//! | `edit` | editor | `{draft?, text}` or `{draft?, remove_last, append?}` |
//! | `publish` | publisher | `{draft?, anonymous?}` |
//! | `discard` | - | `{draft?}` |
//!
//! `thread` is a key local to the transcript; the first `thread` event with
//! a key creates the thread. A `comment` holding a `#reply` command generates
//! its draft immediately unless `deferred` is set, in which case a later
//! `draft` event supplies it. `draft_text` / `text` replace generation with
//! recorded output. When `draft` is omitted, edits and decisions apply to
//! the thread's latest open draft.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::desk::{Action, Desk, DeskError, ReplyPlan};
use crate::drafting::DraftId;
use crate::forum::{CommentId, Role, ThreadId, UserId, UserRef};
use crate::provider::{ChatProvider, EmbeddingProvider};
use crate::retrieval::CorpusItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Register,
    Ingest,
    Thread,
    Comment,
    Draft,
    Edit,
    Publish,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    #[serde(rename = "type")]
    pub kind: EventType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub payload: Value,
    pub time: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterPayload {
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestPayload {
    pub items: Vec<CorpusItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadPayload {
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentPayload {
    pub body: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub anonymous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft_text: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deferred: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraftPayload {
    /// The command comment the draft answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<DraftId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remove_last: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub append: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<DraftId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymous: Option<bool>,
}

/// A record with its payload decoded according to its type.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Register(RegisterPayload),
    Ingest(IngestPayload),
    Thread(ThreadPayload),
    Comment(CommentPayload),
    Draft(DraftPayload),
    Edit(EditPayload),
    Publish(DecisionPayload),
    Discard(DecisionPayload),
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Apply {
        line: usize,
        #[source]
        source: DeskError,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("transcript i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn decode<T: DeserializeOwned + Default>(payload: &Value, required: bool) -> Result<T, String> {
    if payload.is_null() {
        return if required {
            Err("payload is required".into())
        } else {
            Ok(T::default())
        };
    }
    serde_json::from_value(payload.clone()).map_err(|e| format!("bad payload: {e}"))
}

fn decode_required<T: DeserializeOwned>(payload: &Value) -> Result<T, String> {
    if payload.is_null() {
        return Err("payload is required".into());
    }
    serde_json::from_value(payload.clone()).map_err(|e| format!("bad payload: {e}"))
}

impl EventRecord {
    pub fn new(kind: EventType, time: DateTime<Utc>) -> Self {
        EventRecord {
            kind,
            actor: None,
            thread: None,
            payload: Value::Null,
            time,
        }
    }

    pub fn actor(mut self, actor: impl Into<String>) -> Self {
        self.actor = Some(actor.into());
        self
    }

    pub fn thread(mut self, key: impl Into<String>) -> Self {
        self.thread = Some(key.into());
        self
    }

    pub fn payload(mut self, payload: impl Serialize) -> Self {
        self.payload = serde_json::to_value(payload).expect("payload types serialise");
        self
    }

    /// Decodes the payload for this record's type.
    pub fn event(&self) -> Result<Event, String> {
        let need = |what: &str, v: &Option<String>| {
            if v.is_none() {
                Err(format!("{:?} event needs {what}", self.kind))
            } else {
                Ok(())
            }
        };
        Ok(match self.kind {
            EventType::Register => {
                need("an actor", &self.actor)?;
                Event::Register(decode_required(&self.payload)?)
            }
            EventType::Ingest => Event::Ingest(decode_required(&self.payload)?),
            EventType::Thread => {
                need("an actor", &self.actor)?;
                need("a thread key", &self.thread)?;
                Event::Thread(decode_required(&self.payload)?)
            }
            EventType::Comment => {
                need("an actor", &self.actor)?;
                need("a thread key", &self.thread)?;
                Event::Comment(decode_required(&self.payload)?)
            }
            EventType::Draft => {
                need("a thread key", &self.thread)?;
                Event::Draft(decode(&self.payload, false)?)
            }
            EventType::Edit => {
                need("a thread key", &self.thread)?;
                let p: EditPayload = decode(&self.payload, true)?;
                match (&p.text, p.remove_last, &p.append) {
                    (Some(_), None, None) | (None, Some(_), _) | (None, None, Some(_)) => {}
                    _ => return Err("edit needs either text or remove_last/append".into()),
                }
                Event::Edit(p)
            }
            EventType::Publish => {
                need("an actor", &self.actor)?;
                need("a thread key", &self.thread)?;
                Event::Publish(decode(&self.payload, false)?)
            }
            EventType::Discard => {
                need("a thread key", &self.thread)?;
                Event::Discard(decode(&self.payload, false)?)
            }
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialise")
    }
}

/// Parses a transcript, skipping blank lines. Errors name the 1-based line.
pub fn parse_transcript(text: &str) -> Result<Vec<(usize, EventRecord)>, TranscriptError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(line).map_err(|e| TranscriptError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record
            .event()
            .map_err(|message| TranscriptError::Parse { line: line_no, message })?;
        out.push((line_no, record));
    }
    Ok(out)
}

pub fn to_jsonl(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}", r.to_line());
    }
    out
}

/// Drops the last `remove_last` words of `current` and appends `append`.
pub fn splice_words(current: &str, remove_last: usize, append: &str) -> String {
    let mut words: Vec<&str> = current.split_whitespace().collect();
    words.truncate(words.len().saturating_sub(remove_last));
    words.extend(append.split_whitespace());
    words.join(" ")
}

/// Applies records to a desk.
///
/// Without an embedding provider, `ingest` records and `#help` retrieval are
/// skipped (the caller is expected to restore the vector store separately).
/// Without a chat provider, `#reply` commands lacking recorded text wait for
/// a `draft` record.
pub struct Applier<'a> {
    desk: &'a mut Desk,
    embed: Option<&'a dyn EmbeddingProvider>,
    chat: Option<&'a dyn ChatProvider>,
    threads: BTreeMap<String, ThreadId>,
    pending: BTreeMap<ThreadId, Vec<ReplyPlan>>,
}

impl<'a> Applier<'a> {
    pub fn new(
        desk: &'a mut Desk,
        embed: Option<&'a dyn EmbeddingProvider>,
        chat: Option<&'a dyn ChatProvider>,
    ) -> Self {
        Applier {
            desk,
            embed,
            chat,
            threads: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    /// Maps a thread key. Unknown numeric keys refer to existing thread ids.
    fn thread_id(&self, key: &str) -> Option<ThreadId> {
        self.threads.get(key).copied().or_else(|| {
            key.parse::<u64>()
                .ok()
                .map(ThreadId)
                .filter(|id| self.desk.forum().thread(*id).is_ok())
        })
    }

    fn plan_for(&mut self, thread: ThreadId, command: Option<CommentId>) -> Result<ReplyPlan, String> {
        let queue = self.pending.entry(thread).or_default();
        let pos = match command {
            Some(c) => queue.iter().position(|p| p.command_comment == c),
            None => queue.len().checked_sub(1),
        };
        if let Some(pos) = pos {
            return Ok(queue.remove(pos));
        }
        let command = command.ok_or("no pending #reply command in this thread")?;
        self.desk
            .replan(thread, command)
            .map_err(|e| format!("cannot rebuild command {command}: {e}"))
    }

    fn resolve_draft(&self, thread: ThreadId, draft: Option<DraftId>) -> Result<DraftId, String> {
        match draft {
            Some(id) => Ok(id),
            None => self
                .desk
                .latest_open_draft(thread)
                .map(|d| d.draft_id)
                .ok_or_else(|| "thread has no open draft".to_string()),
        }
    }

    pub fn apply(&mut self, line: usize, record: &EventRecord) -> Result<(), TranscriptError> {
        let invalid = |message: String| TranscriptError::Invalid { line, message };
        let apply = |source: DeskError| TranscriptError::Apply { line, source };
        let event = record
            .event()
            .map_err(|message| TranscriptError::Parse { line, message })?;
        let at = record.time;
        let actor = record.actor.as_deref().map(UserId::new);
        let key = record.thread.as_deref();
        let thread = match (record.kind, key) {
            (EventType::Thread | EventType::Register | EventType::Ingest, _) | (_, None) => None,
            (_, Some(k)) => Some(
                self.thread_id(k)
                    .ok_or_else(|| invalid(format!("unknown thread key {k:?}")))?,
            ),
        };
        match event {
            Event::Register(p) => {
                let id = actor.expect("checked by event()");
                let user = UserRef {
                    user_id: id,
                    role: p.role,
                };
                self.desk.forum_mut().register_user(user).map_err(|e| apply(e.into()))?;
            }
            Event::Ingest(p) => {
                if let Some(embed) = self.embed {
                    self.desk.ingest(p.items, embed).map_err(apply)?;
                }
            }
            Event::Thread(p) => {
                let k = key.expect("checked by event()").to_string();
                if self.threads.contains_key(&k) {
                    return Err(invalid(format!("thread key {k:?} already used")));
                }
                let id = self
                    .desk
                    .forum_mut()
                    .create_thread(&actor.expect("checked"), &p.title, &p.body, at)
                    .map_err(|e| apply(e.into()))?
                    .thread_id;
                self.threads.insert(k, id);
            }
            Event::Comment(p) => {
                let thread = thread.expect("checked");
                let sub = self
                    .desk
                    .submit_comment(thread, &actor.expect("checked"), &p.body, p.anonymous, at)
                    .map_err(apply)?;
                match sub.action {
                    Action::None => {}
                    Action::Help => {
                        if let Some(embed) = self.embed {
                            self.desk
                                .run_help(thread, sub.comment.comment_id, embed)
                                .map_err(apply)?;
                        }
                    }
                    Action::Reply(plan) => match (&p.draft_text, self.chat, p.deferred) {
                        (Some(text), _, false) => {
                            self.desk.commit_draft(&plan, text, "transcript", at).map_err(apply)?;
                        }
                        (None, Some(chat), false) => {
                            self.desk.generate_draft(&plan, chat, at).map_err(apply)?;
                        }
                        _ => self.pending.entry(thread).or_default().push(plan),
                    },
                }
            }
            Event::Draft(p) => {
                let thread = thread.expect("checked");
                let plan = self.plan_for(thread, p.command).map_err(invalid)?;
                match (&p.text, self.chat) {
                    (Some(text), _) => {
                        let model = p.model.as_deref().unwrap_or("transcript");
                        self.desk.commit_draft(&plan, text, model, at).map_err(apply)?;
                    }
                    (None, Some(chat)) => {
                        self.desk.generate_draft(&plan, chat, at).map_err(apply)?;
                    }
                    (None, None) => return Err(invalid("draft record has no text and no chat provider".into())),
                }
            }
            Event::Edit(p) => {
                let thread = thread.expect("checked");
                let id = self.resolve_draft(thread, p.draft).map_err(invalid)?;
                let text = match p.text {
                    Some(t) => t,
                    None => {
                        let current = &self.desk.draft(id).map_err(apply)?.current_text;
                        splice_words(current, p.remove_last.unwrap_or(0), p.append.as_deref().unwrap_or(""))
                    }
                };
                self.desk.edit_draft(id, &text, at).map_err(apply)?;
            }
            Event::Publish(p) => {
                let thread = thread.expect("checked");
                let id = self.resolve_draft(thread, p.draft).map_err(invalid)?;
                let anonymous = match p.anonymous {
                    Some(a) => a,
                    None => self.desk.draft(id).map_err(apply)?.requested_anonymous,
                };
                self.desk
                    .publish(id, &actor.expect("checked"), anonymous, at)
                    .map_err(apply)?;
            }
            Event::Discard(p) => {
                let thread = thread.expect("checked");
                let id = self.resolve_draft(thread, p.draft).map_err(invalid)?;
                self.desk.discard(id).map_err(apply)?;
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, records: &[(usize, EventRecord)]) -> Result<(), TranscriptError> {
        for (line, r) in records {
            self.apply(*line, r)?;
        }
        Ok(())
    }

    /// `#reply` commands still waiting for a draft, oldest first.
    pub fn pending(&self) -> Vec<&ReplyPlan> {
        self.pending.values().flatten().collect()
    }
}
