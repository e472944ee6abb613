//! Threads, comments, roles and anonymous aliases.
//!
//! Instructor commands and drafts live in the thread as `instructor_only`
//! comments; [`Forum::render_view`] strips them for students and replaces the
//! author of aliased comments with the alias label.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        UserId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Student,
    Instructor,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserRef {
    pub user_id: UserId,
    pub role: Role,
}

impl UserRef {
    pub fn student(id: impl Into<String>) -> Self {
        UserRef {
            user_id: UserId::new(id),
            role: Role::Student,
        }
    }

    pub fn instructor(id: impl Into<String>) -> Self {
        UserRef {
            user_id: UserId::new(id),
            role: Role::Instructor,
        }
    }

    pub fn is_instructor(&self) -> bool {
        self.role == Role::Instructor
    }
}

/// The user that authors drafts and anonymous answers.
pub const ASSISTANT_ID: &str = "assistant";

pub fn assistant() -> UserRef {
    UserRef::instructor(ASSISTANT_ID)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThreadId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommentId(pub u64);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for CommentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    StudentMessage,
    InstructorMessage,
    Command,
    Draft,
    PublishedAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    InstructorOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymousAlias {
    pub label: String,
    pub thread_id: ThreadId,
    pub user_id: UserId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "alias", rename_all = "lowercase")]
pub enum DisplayIdentity {
    Real,
    Alias(AnonymousAlias),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub author: UserRef,
    pub body: String,
    pub kind: PostKind,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: CommentId,
    pub author: UserRef,
    pub display_identity: DisplayIdentity,
    pub body: String,
    pub visibility: Visibility,
    pub kind: PostKind,
    pub created_at: DateTime<Utc>,
    /// Forum-wide insertion counter; breaks timestamp ties.
    pub seq: u64,
}

impl Comment {
    pub fn is_hidden_from_students(&self) -> bool {
        self.visibility == Visibility::InstructorOnly || matches!(self.kind, PostKind::Command | PostKind::Draft)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: ThreadId,
    pub title: String,
    pub question: Post,
    pub comments: Vec<Comment>,
    pub created_at: DateTime<Utc>,
}

impl Thread {
    pub fn comment(&self, id: CommentId) -> Option<&Comment> {
        self.comments.iter().find(|c| c.comment_id == id)
    }

    /// Title and body, as used for retrieval and prompting.
    pub fn question_text(&self) -> String {
        format!("{}\n{}", self.title, self.question.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForumError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("thread {0} not found")]
    ThreadNotFound(ThreadId),
    #[error("comment {0} not found")]
    CommentNotFound(CommentId),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("user {0} is already registered with a different role")]
    RoleConflict(UserId),
    #[error("alias word list exhausted for thread {0}")]
    AliasCapacity(ThreadId),
}

pub const DEFAULT_ALIAS_WORDS: [&str; 50] = [
    "Kangaroo",
    "Goose",
    "Penguin",
    "Otter",
    "Koala",
    "Falcon",
    "Badger",
    "Dolphin",
    "Heron",
    "Lynx",
    "Moose",
    "Narwhal",
    "Ocelot",
    "Panda",
    "Quokka",
    "Raven",
    "Salamander",
    "Tapir",
    "Urchin",
    "Vulture",
    "Walrus",
    "Yak",
    "Zebra",
    "Albatross",
    "Beaver",
    "Cheetah",
    "Dingo",
    "Echidna",
    "Ferret",
    "Gecko",
    "Hedgehog",
    "Ibis",
    "Jackal",
    "Kiwi",
    "Lemur",
    "Meerkat",
    "Newt",
    "Orca",
    "Pelican",
    "Quail",
    "Robin",
    "Seal",
    "Tortoise",
    "Wombat",
    "Alpaca",
    "Bison",
    "Crane",
    "Donkey",
    "Emu",
    "Fox",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForumConfig {
    /// Alias nouns; labels render as `Anonymous <noun>`.
    pub alias_words: Vec<String>,
    /// Mixed with the thread id to seed each thread's alias order.
    pub alias_seed: u64,
}

impl Default for ForumConfig {
    fn default() -> Self {
        ForumConfig {
            alias_words: DEFAULT_ALIAS_WORDS.iter().map(|s| s.to_string()).collect(),
            alias_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
struct AliasBook {
    order: Vec<usize>,
    assigned: BTreeMap<UserId, String>,
}

/// The full forum state for one course.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forum {
    config: ForumConfig,
    users: BTreeMap<UserId, UserRef>,
    threads: BTreeMap<ThreadId, Thread>,
    aliases: BTreeMap<ThreadId, AliasBook>,
    next_thread: u64,
    next_comment: u64,
    seq: u64,
}

impl Default for Forum {
    fn default() -> Self {
        Forum::new(ForumConfig::default())
    }
}

fn non_empty(field: &str, value: &str) -> Result<(), ForumError> {
    if value.trim().is_empty() {
        Err(ForumError::Validation(format!("{field} must not be empty")))
    } else {
        Ok(())
    }
}

impl Forum {
    pub fn new(config: ForumConfig) -> Self {
        let mut forum = Forum {
            config,
            users: BTreeMap::new(),
            threads: BTreeMap::new(),
            aliases: BTreeMap::new(),
            next_thread: 1,
            next_comment: 1,
            seq: 0,
        };
        let bot = assistant();
        forum.users.insert(bot.user_id.clone(), bot);
        forum
    }

    pub fn register_user(&mut self, user: UserRef) -> Result<(), ForumError> {
        non_empty("user id", user.user_id.as_str())?;
        match self.users.get(&user.user_id) {
            Some(existing) if existing.role != user.role => Err(ForumError::RoleConflict(user.user_id)),
            Some(_) => Ok(()),
            None => {
                self.users.insert(user.user_id.clone(), user);
                Ok(())
            }
        }
    }

    pub fn user(&self, id: &UserId) -> Result<&UserRef, ForumError> {
        self.users.get(id).ok_or_else(|| ForumError::UnknownUser(id.clone()))
    }

    pub fn thread(&self, id: ThreadId) -> Result<&Thread, ForumError> {
        self.threads.get(&id).ok_or(ForumError::ThreadNotFound(id))
    }

    pub fn threads(&self) -> impl Iterator<Item = &Thread> {
        self.threads.values()
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn create_thread(
        &mut self,
        author: &UserId,
        title: &str,
        body: &str,
        at: DateTime<Utc>,
    ) -> Result<&Thread, ForumError> {
        let author = self.user(author)?.clone();
        non_empty("title", title)?;
        non_empty("body", body)?;
        let id = ThreadId(self.next_thread);
        self.next_thread += 1;
        let kind = match author.role {
            Role::Student => PostKind::StudentMessage,
            Role::Instructor => PostKind::InstructorMessage,
        };
        let thread = Thread {
            thread_id: id,
            title: title.to_string(),
            question: Post {
                author,
                body: body.to_string(),
                kind,
                created_at: at,
            },
            comments: Vec::new(),
            created_at: at,
        };
        self.next_seq();
        Ok(self.threads.entry(id).or_insert(thread))
    }

    /// Returns the alias of `user` in `thread`, assigning one on first use.
    ///
    /// Each thread walks the word list in its own seeded order, so a user keeps
    /// one label per thread and no two users share a label there.
    pub fn assign_alias(&mut self, thread: ThreadId, user: &UserId) -> Result<AnonymousAlias, ForumError> {
        self.thread(thread)?;
        self.user(user)?;
        let words = &self.config.alias_words;
        let seed = self.config.alias_seed;
        let book = self.aliases.entry(thread).or_insert_with(|| {
            let mut order: Vec<usize> = (0..words.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(thread.0 ^ seed.rotate_left(32));
            order.shuffle(&mut rng);
            AliasBook {
                order,
                assigned: BTreeMap::new(),
            }
        });
        let label = match book.assigned.get(user) {
            Some(label) => label.clone(),
            None => {
                let idx = *book
                    .order
                    .get(book.assigned.len())
                    .ok_or(ForumError::AliasCapacity(thread))?;
                let label = format!("Anonymous {}", words[idx]);
                book.assigned.insert(user.clone(), label.clone());
                label
            }
        };
        Ok(AnonymousAlias {
            label,
            thread_id: thread,
            user_id: user.clone(),
        })
    }

    fn push_comment(
        &mut self,
        thread: ThreadId,
        author: UserRef,
        identity: DisplayIdentity,
        body: &str,
        kind: PostKind,
        at: DateTime<Utc>,
    ) -> Result<Comment, ForumError> {
        let visibility = match kind {
            PostKind::Command | PostKind::Draft => Visibility::InstructorOnly,
            _ => Visibility::Public,
        };
        let comment_id = CommentId(self.next_comment);
        let seq = self.next_seq();
        let t = self
            .threads
            .get_mut(&thread)
            .ok_or(ForumError::ThreadNotFound(thread))?;
        let floor = t.comments.last().map(|c| c.created_at).unwrap_or(t.created_at);
        let comment = Comment {
            comment_id,
            author,
            display_identity: identity,
            body: body.to_string(),
            visibility,
            kind,
            created_at: at.max(floor),
            seq,
        };
        t.comments.push(comment.clone());
        self.next_comment += 1;
        Ok(comment)
    }

    /// Appends a user comment. Instructor comments that contain a hashtag
    /// command become hidden `command` comments; students' text is stored as
    /// written and never interpreted.
    pub fn add_comment(
        &mut self,
        thread: ThreadId,
        author: &UserId,
        body: &str,
        anonymous: bool,
        at: DateTime<Utc>,
    ) -> Result<Comment, ForumError> {
        self.thread(thread)?;
        let author = self.user(author)?.clone();
        non_empty("comment body", body)?;
        let kind = match author.role {
            Role::Instructor if command::scan(body).is_some() => PostKind::Command,
            Role::Instructor => PostKind::InstructorMessage,
            Role::Student => PostKind::StudentMessage,
        };
        let identity = if anonymous {
            DisplayIdentity::Alias(self.assign_alias(thread, &author.user_id)?)
        } else {
            DisplayIdentity::Real
        };
        self.push_comment(thread, author, identity, body, kind, at)
    }

    /// Appends a hidden draft comment authored by the assistant.
    pub fn append_draft(&mut self, thread: ThreadId, body: &str, at: DateTime<Utc>) -> Result<Comment, ForumError> {
        self.thread(thread)?;
        self.push_comment(thread, assistant(), DisplayIdentity::Real, body, PostKind::Draft, at)
    }

    /// Appends a published answer, either under the publishing instructor's
    /// name or under the assistant's per-thread alias.
    pub fn append_answer(
        &mut self,
        thread: ThreadId,
        publisher: &UserId,
        body: &str,
        anonymous: bool,
        at: DateTime<Utc>,
    ) -> Result<Comment, ForumError> {
        self.thread(thread)?;
        non_empty("answer body", body)?;
        let (author, identity) = if anonymous {
            let bot = assistant();
            let alias = self.assign_alias(thread, &bot.user_id)?;
            (bot, DisplayIdentity::Alias(alias))
        } else {
            (self.user(publisher)?.clone(), DisplayIdentity::Real)
        };
        self.push_comment(thread, author, identity, body, PostKind::PublishedAnswer, at)
    }

    /// Rewrites a draft comment's body to mirror its current text.
    pub fn set_draft_body(&mut self, thread: ThreadId, comment: CommentId, body: &str) -> Result<(), ForumError> {
        let t = self
            .threads
            .get_mut(&thread)
            .ok_or(ForumError::ThreadNotFound(thread))?;
        let c = t
            .comments
            .iter_mut()
            .find(|c| c.comment_id == comment && c.kind == PostKind::Draft)
            .ok_or(ForumError::CommentNotFound(comment))?;
        c.body = body.to_string();
        Ok(())
    }

    pub fn render_view(&self, thread: ThreadId, viewer: &UserRef) -> Result<RenderedThread, ForumError> {
        Ok(render_thread(self.thread(thread)?, viewer))
    }
}

/// One entry of a rendered thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_id: Option<CommentId>,
    pub display_name: String,
    /// True author; omitted from student views of aliased entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<UserId>,
    pub kind: PostKind,
    pub visibility: Visibility,
    pub body: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedThread {
    pub thread_id: ThreadId,
    pub title: String,
    pub question: RenderedEntry,
    pub comments: Vec<RenderedEntry>,
}

/// One comment as `viewer` would see it, hidden or not.
pub fn render_comment(c: &Comment, viewer: &UserRef) -> RenderedEntry {
    let (display_name, user_id) = match (&c.display_identity, viewer.role) {
        (DisplayIdentity::Alias(a), Role::Student) => (a.label.clone(), None),
        (DisplayIdentity::Alias(a), Role::Instructor) => (a.label.clone(), Some(c.author.user_id.clone())),
        (DisplayIdentity::Real, _) => (c.author.user_id.to_string(), Some(c.author.user_id.clone())),
    };
    RenderedEntry {
        comment_id: Some(c.comment_id),
        display_name,
        user_id,
        kind: c.kind,
        visibility: c.visibility,
        body: c.body.clone(),
        created_at: c.created_at,
    }
}

/// Students see only public, non-command, non-draft entries, and aliased
/// entries carry the alias label alone. Instructors see everything.
pub fn render_thread(thread: &Thread, viewer: &UserRef) -> RenderedThread {
    let q = &thread.question;
    RenderedThread {
        thread_id: thread.thread_id,
        title: thread.title.clone(),
        question: RenderedEntry {
            comment_id: None,
            display_name: q.author.user_id.to_string(),
            user_id: Some(q.author.user_id.clone()),
            kind: q.kind,
            visibility: Visibility::Public,
            body: q.body.clone(),
            created_at: q.created_at,
        },
        comments: thread
            .comments
            .iter()
            .filter(|c| viewer.is_instructor() || !c.is_hidden_from_students())
            .map(|c| render_comment(c, viewer))
            .collect(),
    }
}
