//! The moderation loop: forum, corpus, drafts and usage log in one place.
//!
//! A [`Desk`] never calls a chat provider on its own. Submitting a `#reply`
//! returns a [`ReplyPlan`]; the caller runs the plan (now, later, or on
//! another thread) and hands the text back through [`Desk::commit_draft`].

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, diff_edits, AdoptionStats, EditSeries, UsageReport};
use crate::command::{self, classify, CombinationLabel, CommandError, ValidatedCommand};
use crate::drafting::{
    assemble_prompt, Draft, DraftError, DraftId, DraftingConfig, PromptPackage, Provenance, PublishRecord,
};
use crate::forum::{Comment, CommentId, Forum, ForumConfig, ForumError, PostKind, Role, ThreadId, UserId};
use crate::provider::{ChatProvider, EmbeddingProvider, ProviderError};
use crate::retrieval::{Category, CorpusItem, HelpResult, RetrievalError, VectorStore};

#[derive(Debug, Error)]
pub enum DeskError {
    #[error(transparent)]
    Forum(#[from] ForumError),
    #[error("invalid command: {0}")]
    Command(#[from] CommandError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Draft(#[from] DraftError),
    #[error("generation failed: {0}; the command can be re-issued to try again")]
    Provider(#[from] ProviderError),
    #[error("draft {0} not found")]
    DraftNotFound(DraftId),
    #[error("user {0} is not an instructor")]
    NotInstructor(UserId),
}

/// One recognised command, as counted by usage reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub thread_id: ThreadId,
    pub comment_id: CommentId,
    pub label: CombinationLabel,
    pub command: ValidatedCommand,
    pub at: DateTime<Utc>,
}

/// Everything needed to produce a draft for one `#reply` command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyPlan {
    pub thread_id: ThreadId,
    pub command_comment: CommentId,
    pub label: CombinationLabel,
    pub anonymous: bool,
    pub package: PromptPackage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Action {
    None,
    Help,
    Reply(ReplyPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub comment: Comment,
    pub command: Option<ValidatedCommand>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpEntry {
    pub command_comment: CommentId,
    pub result: HelpResult,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeskConfig {
    #[serde(default)]
    pub forum: ForumConfig,
    #[serde(default)]
    pub drafting: DraftingConfig,
}

/// Forum state plus drafts and measurements. The vector store is kept
/// alongside but serialised separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Desk {
    forum: Forum,
    drafts: BTreeMap<DraftId, Draft>,
    next_draft: u64,
    usage: Vec<UsageEvent>,
    help: BTreeMap<ThreadId, HelpEntry>,
    drafting: DraftingConfig,
    #[serde(skip)]
    store: VectorStore,
}

impl Desk {
    pub fn new(config: DeskConfig, store: VectorStore) -> Self {
        Desk {
            forum: Forum::new(config.forum),
            drafts: BTreeMap::new(),
            next_draft: 1,
            usage: Vec::new(),
            help: BTreeMap::new(),
            drafting: config.drafting,
            store,
        }
    }

    pub fn forum(&self) -> &Forum {
        &self.forum
    }

    pub fn forum_mut(&mut self) -> &mut Forum {
        &mut self.forum
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut VectorStore {
        &mut self.store
    }

    pub fn set_store(&mut self, store: VectorStore) {
        self.store = store;
    }

    pub fn drafting_config(&self) -> &DraftingConfig {
        &self.drafting
    }

    pub fn set_drafting_config(&mut self, cfg: DraftingConfig) {
        self.drafting = cfg;
    }

    pub fn drafts(&self) -> impl Iterator<Item = &Draft> {
        self.drafts.values()
    }

    pub fn draft(&self, id: DraftId) -> Result<&Draft, DeskError> {
        self.drafts.get(&id).ok_or(DeskError::DraftNotFound(id))
    }

    pub fn thread_drafts(&self, thread: ThreadId) -> impl Iterator<Item = &Draft> {
        self.drafts.values().filter(move |d| d.thread_id == thread)
    }

    /// The most recent draft of `thread` that is still pending or edited.
    pub fn latest_open_draft(&self, thread: ThreadId) -> Option<&Draft> {
        self.thread_drafts(thread).filter(|d| d.status.is_open()).last()
    }

    pub fn usage_events(&self) -> &[UsageEvent] {
        &self.usage
    }

    pub fn latest_help(&self, thread: ThreadId) -> Option<&HelpEntry> {
        self.help.get(&thread)
    }

    pub fn ingest(&mut self, items: Vec<CorpusItem>, provider: &dyn EmbeddingProvider) -> Result<usize, DeskError> {
        Ok(self.store.ingest(items, provider)?)
    }

    /// Posts a comment. An instructor comment containing hashtags must form a
    /// valid command, and any context identifiers must resolve, before
    /// anything is stored; otherwise the error is returned and the thread is
    /// left untouched.
    pub fn submit_comment(
        &mut self,
        thread: ThreadId,
        author: &UserId,
        body: &str,
        anonymous: bool,
        at: DateTime<Utc>,
    ) -> Result<Submission, DeskError> {
        let role = self.forum.user(author)?.role;
        let question = self.forum.thread(thread)?.question_text();
        let command = match role {
            Role::Instructor => command::parse(body)?,
            Role::Student => None,
        };
        let package = match &command {
            Some(cmd) => self.package_for(&question, cmd)?,
            None => None,
        };

        let comment = self.forum.add_comment(thread, author, body, anonymous, at)?;
        let action = match &command {
            Some(cmd) => {
                self.usage.push(UsageEvent {
                    thread_id: thread,
                    comment_id: comment.comment_id,
                    label: classify(cmd),
                    command: cmd.clone(),
                    at: comment.created_at,
                });
                match (cmd, package) {
                    (ValidatedCommand::Reply { anon, .. }, Some(package)) => Action::Reply(ReplyPlan {
                        thread_id: thread,
                        command_comment: comment.comment_id,
                        label: classify(cmd),
                        anonymous: *anon,
                        package,
                    }),
                    _ => Action::Help,
                }
            }
            None => Action::None,
        };
        Ok(Submission {
            comment,
            command,
            action,
        })
    }

    /// Resolves contexts and assembles the prompt for a `#reply` command.
    fn package_for(&self, question: &str, cmd: &ValidatedCommand) -> Result<Option<PromptPackage>, DeskError> {
        let ValidatedCommand::Reply {
            instructions,
            prev,
            related,
            ..
        } = cmd
        else {
            return Ok(None);
        };
        let mut contexts = Vec::new();
        if !prev.is_empty() {
            contexts.extend(self.store.resolve(prev, Category::Previous)?);
        }
        if !related.is_empty() {
            contexts.extend(self.store.resolve(related, Category::Related)?);
        }
        Ok(Some(assemble_prompt(
            &self.drafting,
            question,
            instructions,
            &contexts,
        )?))
    }

    /// Rebuilds the plan of an already stored `#reply` command comment.
    pub fn replan(&self, thread: ThreadId, command_comment: CommentId) -> Result<ReplyPlan, DeskError> {
        let t = self.forum.thread(thread)?;
        let comment = t
            .comment(command_comment)
            .filter(|c| c.kind == PostKind::Command)
            .ok_or(ForumError::CommentNotFound(command_comment))?;
        let cmd = command::parse(&comment.body)?
            .filter(|c| !c.is_help())
            .ok_or_else(|| DraftError::Validation(format!("comment {command_comment} is not a #reply command")))?;
        let package = self
            .package_for(&t.question_text(), &cmd)?
            .expect("reply commands have a package");
        let ValidatedCommand::Reply { anon, .. } = cmd else {
            unreachable!()
        };
        Ok(ReplyPlan {
            thread_id: thread,
            command_comment,
            label: classify(&cmd),
            anonymous: anon,
            package,
        })
    }

    /// Runs retrieval for a thread's question and remembers the result.
    pub fn run_help(
        &mut self,
        thread: ThreadId,
        command_comment: CommentId,
        provider: &dyn EmbeddingProvider,
    ) -> Result<&HelpEntry, DeskError> {
        let question = self.forum.thread(thread)?.question_text();
        let result = self.store.help(&question, provider)?;
        self.record_help(thread, command_comment, result)
    }

    /// Stores a help result computed elsewhere, e.g. from
    /// [`VectorStore::help_vector`].
    pub fn record_help(
        &mut self,
        thread: ThreadId,
        command_comment: CommentId,
        result: HelpResult,
    ) -> Result<&HelpEntry, DeskError> {
        self.forum.thread(thread)?;
        self.help.insert(
            thread,
            HelpEntry {
                command_comment,
                result,
            },
        );
        Ok(&self.help[&thread])
    }

    /// Stores generated text as a new pending draft.
    pub fn commit_draft(
        &mut self,
        plan: &ReplyPlan,
        text: &str,
        model: &str,
        at: DateTime<Utc>,
    ) -> Result<&Draft, DeskError> {
        if text.trim().is_empty() {
            return Err(DraftError::Validation("generated text is empty".into()).into());
        }
        let comment = self.forum.append_draft(plan.thread_id, text, at)?;
        let id = DraftId(self.next_draft);
        self.next_draft += 1;
        let mut draft = Draft::new(
            id,
            plan.thread_id,
            comment.comment_id,
            text.to_string(),
            Provenance {
                combination_label: plan.label.clone(),
                context_ids: plan.package.context_ids(),
                model: model.to_string(),
                command_comment: plan.command_comment,
            },
            comment.created_at,
        );
        draft.requested_anonymous = plan.anonymous;
        Ok(self.drafts.entry(id).or_insert(draft))
    }

    /// Calls `chat` and commits the result. A provider failure leaves the
    /// thread and drafts unchanged.
    pub fn generate_draft(
        &mut self,
        plan: &ReplyPlan,
        chat: &dyn ChatProvider,
        at: DateTime<Utc>,
    ) -> Result<&Draft, DeskError> {
        let text = chat.chat_complete(&plan.package)?;
        self.commit_draft(plan, &text, chat.model(), at)
    }

    fn draft_mut(&mut self, id: DraftId) -> Result<&mut Draft, DeskError> {
        self.drafts.get_mut(&id).ok_or(DeskError::DraftNotFound(id))
    }

    pub fn edit_draft(&mut self, id: DraftId, text: &str, at: DateTime<Utc>) -> Result<&Draft, DeskError> {
        let draft = self.draft_mut(id)?;
        if draft.edit(text, at)? {
            let (thread, comment) = (draft.thread_id, draft.comment_id);
            self.forum.set_draft_body(thread, comment, text)?;
        }
        self.draft(id)
    }

    /// Publishes the draft's current text as a public answer.
    pub fn publish(
        &mut self,
        id: DraftId,
        publisher: &UserId,
        anonymous: bool,
        at: DateTime<Utc>,
    ) -> Result<&Draft, DeskError> {
        if !self.forum.user(publisher)?.is_instructor() {
            return Err(DeskError::NotInstructor(publisher.clone()));
        }
        let draft = self.draft(id)?;
        draft.check_publishable()?;
        let metrics = diff_edits(draft.generated_text(), &draft.current_text);
        let (thread, body) = (draft.thread_id, draft.current_text.clone());
        let comment = self.forum.append_answer(thread, publisher, &body, anonymous, at)?;
        self.draft_mut(id)?.mark_published(
            PublishRecord {
                comment_id: comment.comment_id,
                anonymous,
                published_at: comment.created_at,
            },
            metrics,
        )?;
        self.draft(id)
    }

    pub fn discard(&mut self, id: DraftId) -> Result<&Draft, DeskError> {
        self.draft_mut(id)?.discard()?;
        self.draft(id)
    }

    pub fn usage_report(&self) -> UsageReport {
        analytics::usage_report(self.usage.iter().map(|u| &u.command))
    }

    pub fn edit_series(&self) -> EditSeries {
        analytics::edit_distribution(self.drafts.values())
    }

    pub fn adoption(&self) -> AdoptionStats {
        analytics::adoption_stats(&self.forum, self.drafts.values())
    }

    /// Comments of `thread` that are published answers.
    pub fn answers(&self, thread: ThreadId) -> Result<Vec<&Comment>, DeskError> {
        Ok(self
            .forum
            .thread(thread)?
            .comments
            .iter()
            .filter(|c| c.kind == PostKind::PublishedAnswer)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::*;
    use crate::drafting::DraftStatus;
    use crate::forum::{DisplayIdentity, UserRef};
    use crate::provider::MockProvider;
    use crate::retrieval::ItemId;

    fn t(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_720_000_000 + s, 0).unwrap()
    }

    fn desk() -> (Desk, MockProvider, ThreadId) {
        let mock = MockProvider::new(7, 64);
        let mut d = Desk::new(DeskConfig::default(), VectorStore::default());
        d.forum_mut().register_user(UserRef::student("S1")).unwrap();
        d.forum_mut().register_user(UserRef::instructor("I1")).unwrap();
        d.ingest(
            vec![
                CorpusItem::new(
                    2,
                    Category::Previous,
                    "push",
                    "git push has no remote configured",
                    "test",
                ),
                CorpusItem::new(42, Category::Related, "lab 1", "venue bookings arraylist order", "test"),
                CorpusItem::new(44, Category::Related, "lab 2", "java collections sorting", "test"),
            ],
            &mock,
        )
        .unwrap();
        let th = d
            .forum_mut()
            .create_thread(
                &UserId::new("S1"),
                "Git push fails",
                "fatal: No configured push destination.",
                t(0),
            )
            .unwrap()
            .thread_id;
        (d, mock, th)
    }

    #[test]
    fn invalid_command_is_not_stored() {
        let (mut d, _, th) = desk();
        let err = d
            .submit_comment(th, &UserId::new("I1"), "#anon", false, t(1))
            .unwrap_err();
        assert!(matches!(err, DeskError::Command(CommandError::OrphanModifier(_))));
        assert!(d.forum().thread(th).unwrap().comments.is_empty());
        assert!(d.usage_events().is_empty());
        let err = d
            .submit_comment(th, &UserId::new("I1"), "#reply #related 99", false, t(1))
            .unwrap_err();
        assert!(matches!(err, DeskError::Retrieval(RetrievalError::UnknownIds(_))));
        assert!(d.forum().thread(th).unwrap().comments.is_empty());
    }

    #[test]
    fn student_hashtags_are_plain_text() {
        let (mut d, _, th) = desk();
        let s = d
            .submit_comment(th, &UserId::new("S1"), "#reply please", false, t(1))
            .unwrap();
        assert_eq!(s.action, Action::None);
        assert_eq!(s.comment.kind, PostKind::StudentMessage);
        assert!(d.usage_events().is_empty());
    }

    #[test]
    fn full_reply_pipeline() {
        let (mut d, mock, th) = desk();
        let i1 = UserId::new("I1");
        let s = d
            .submit_comment(th, &i1, "#reply #related 42,44 #anon", false, t(1))
            .unwrap();
        let Action::Reply(plan) = s.action else {
            panic!("expected reply")
        };
        assert!(plan.anonymous);
        let id = d.generate_draft(&plan, &mock, t(2)).unwrap().draft_id;
        let draft = d.draft(id).unwrap();
        assert_eq!(draft.provenance.combination_label.as_str(), "reply∅ anon related");
        assert!(draft.generated_text().contains("related [42,44]"));

        let short = "Keep the bookings in an ArrayList.";
        d.edit_draft(id, short, t(3)).unwrap();
        let published = d.publish(id, &i1, true, t(4)).unwrap();
        assert_eq!(published.status, DraftStatus::Published);
        let m = published.edit_metrics.unwrap();
        assert!(m.removals > m.additions);

        let answers = d.answers(th).unwrap();
        assert_eq!(answers.len(), 1);
        assert_eq!(answers[0].body, short);
        assert!(matches!(answers[0].display_identity, DisplayIdentity::Alias(_)));
        let view = d.forum().render_view(th, &UserRef::student("S1")).unwrap();
        assert_eq!(view.comments.len(), 1);
        assert!(view.comments[0].display_name.starts_with("Anonymous "));

        assert_eq!(d.adoption().drafts_published_edited, 1);
        assert_eq!(d.usage_report().count("reply∅ anon related"), 1);
        assert!(d.edit_draft(id, "again", t(5)).is_err());
    }

    struct Down;
    impl ChatProvider for Down {
        fn model(&self) -> &str {
            "down"
        }
        fn chat_complete(&self, _: &PromptPackage) -> Result<String, ProviderError> {
            Err(ProviderError::Timeout)
        }
    }

    #[test]
    fn provider_failure_creates_no_draft() {
        let (mut d, _, th) = desk();
        let s = d.submit_comment(th, &UserId::new("I1"), "#reply", false, t(1)).unwrap();
        let Action::Reply(plan) = s.action else { panic!() };
        let before = d.forum().thread(th).unwrap().clone();
        assert!(matches!(
            d.generate_draft(&plan, &Down, t(2)),
            Err(DeskError::Provider(_))
        ));
        assert_eq!(d.drafts().count(), 0);
        assert_eq!(d.forum().thread(th).unwrap(), &before);
    }

    #[test]
    fn discard_then_regenerate() {
        let (mut d, mock, th) = desk();
        let i1 = UserId::new("I1");
        let Action::Reply(plan) = d.submit_comment(th, &i1, "#reply", false, t(1)).unwrap().action else {
            panic!()
        };
        let first = d.generate_draft(&plan, &mock, t(2)).unwrap().draft_id;
        d.discard(first).unwrap();
        let Action::Reply(plan) = d
            .submit_comment(th, &i1, "#reply be brief", false, t(3))
            .unwrap()
            .action
        else {
            panic!()
        };
        let second = d.generate_draft(&plan, &mock, t(4)).unwrap().draft_id;
        assert_ne!(first, second);
        assert_eq!(d.draft(first).unwrap().status, DraftStatus::Discarded);
        assert_eq!(d.latest_open_draft(th).unwrap().draft_id, second);
        let a = d.adoption();
        assert_eq!((a.drafts_created, a.drafts_discarded, a.drafts_pending), (2, 1, 1));
    }

    #[test]
    fn help_is_cached_per_thread() {
        let (mut d, mock, th) = desk();
        let s = d.submit_comment(th, &UserId::new("I1"), "#help", false, t(1)).unwrap();
        assert_eq!(s.action, Action::Help);
        let entry = d.run_help(th, s.comment.comment_id, &mock).unwrap();
        assert_eq!(entry.result.previous.len(), 1);
        assert_eq!(entry.result.related.len(), 2);
        assert_eq!(entry.result.previous[0].item_id, ItemId(2));
        assert!(d.latest_help(th).is_some());
    }

    #[test]
    fn serde_round_trip_keeps_state() {
        let (mut d, mock, th) = desk();
        let Action::Reply(plan) = d
            .submit_comment(th, &UserId::new("I1"), "#reply", false, t(1))
            .unwrap()
            .action
        else {
            panic!()
        };
        d.generate_draft(&plan, &mock, t(2)).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: Desk = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        assert_eq!(back.drafts().count(), 1);
    }
}
