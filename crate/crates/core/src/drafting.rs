//! Prompt assembly and the draft lifecycle.
//!
//! A draft starts `pending`, may be edited any number of times, and ends
//! either `published` or `discarded`:
//!
//! ```text
//! pending ──edit──▶ edited ──edit──▶ edited
//!    │                 │
//!    ├──publish────────┼──▶ published
//!    └──discard────────┴──▶ discarded
//! ```

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::EditMetrics;
use crate::command::CombinationLabel;
use crate::forum::{CommentId, ThreadId};
use crate::retrieval::{Category, CorpusItem, ItemId};

pub const DEFAULT_PREAMBLE: &str = "You are a teaching assistant for a university programming \
course, drafting a reply to a student's forum question for the instructor to review. Be \
concise and accurate, match the level of the question, and do not reveal assignment \
solutions unless the instructor asks you to.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DraftingConfig {
    pub system_preamble: String,
    /// Whitespace-token budget for the whole prompt.
    pub token_budget: usize,
}

impl Default for DraftingConfig {
    fn default() -> Self {
        DraftingConfig {
            system_preamble: DEFAULT_PREAMBLE.into(),
            token_budget: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub category: Category,
    pub item_id: ItemId,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPackage {
    pub system_preamble: String,
    pub context_blocks: Vec<ContextBlock>,
    pub question: String,
    pub instructions: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncation_notes: Vec<String>,
}

impl PromptPackage {
    /// The user-turn text sent to a chat provider.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        for b in &self.context_blocks {
            let kind = match b.category {
                Category::Previous => "previous forum post",
                Category::Related => "course material",
            };
            out.push_str(&format!(
                "Context from {kind} #{}: {}\n{}\n\n",
                b.item_id, b.title, b.text
            ));
        }
        out.push_str("Student question:\n");
        out.push_str(&self.question);
        if !self.instructions.is_empty() {
            out.push_str("\n\nInstructor instructions:\n");
            out.push_str(&self.instructions);
        }
        out
    }

    pub fn context_ids(&self) -> Vec<(Category, ItemId)> {
        self.context_blocks.iter().map(|b| (b.category, b.item_id)).collect()
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DraftError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cannot {action} a {from} draft")]
    InvalidTransition { from: DraftStatus, action: &'static str },
}

/// Builds the generation prompt.
///
/// Previous-post contexts come first, then related material, each group in
/// the order given. When the prompt exceeds the token budget, context text is
/// cut from the tail of the package backwards and each cut is noted.
pub fn assemble_prompt(
    config: &DraftingConfig,
    question: &str,
    instructions: &str,
    contexts: &[CorpusItem],
) -> Result<PromptPackage, DraftError> {
    if question.trim().is_empty() {
        return Err(DraftError::Validation("question is empty".into()));
    }
    let ordered = contexts
        .iter()
        .filter(|c| c.category == Category::Previous)
        .chain(contexts.iter().filter(|c| c.category == Category::Related));

    let fixed = word_count(&config.system_preamble) + word_count(question) + word_count(instructions);
    let mut remaining = config.token_budget.saturating_sub(fixed);
    let mut notes = Vec::new();
    let mut blocks = Vec::new();
    for item in ordered {
        let words: Vec<&str> = item.body.split_whitespace().collect();
        let keep = words.len().min(remaining);
        remaining -= keep;
        let text = if keep == words.len() {
            item.body.clone()
        } else {
            let omitted = words.len() - keep;
            notes.push(format!(
                "{} #{} truncated from {} to {} words",
                item.category,
                item.item_id,
                words.len(),
                keep
            ));
            let mut t = words[..keep].join(" ");
            if !t.is_empty() {
                t.push(' ');
            }
            t.push_str(&format!("[… {omitted} words truncated]"));
            t
        };
        blocks.push(ContextBlock {
            category: item.category,
            item_id: item.item_id,
            title: item.title.clone(),
            text,
        });
    }
    Ok(PromptPackage {
        system_preamble: config.system_preamble.clone(),
        context_blocks: blocks,
        question: question.to_string(),
        instructions: instructions.to_string(),
        truncation_notes: notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DraftId(pub u64);

impl fmt::Display for DraftId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DraftStatus {
    Pending,
    Edited,
    Published,
    Discarded,
}

impl DraftStatus {
    pub fn is_open(self) -> bool {
        matches!(self, DraftStatus::Pending | DraftStatus::Edited)
    }
}

impl fmt::Display for DraftStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DraftStatus::Pending => "pending",
            DraftStatus::Edited => "edited",
            DraftStatus::Published => "published",
            DraftStatus::Discarded => "discarded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub at: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub combination_label: CombinationLabel,
    pub context_ids: Vec<(Category, ItemId)>,
    pub model: String,
    /// The instructor's command comment that asked for this draft.
    pub command_comment: CommentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishRecord {
    pub comment_id: CommentId,
    pub anonymous: bool,
    pub published_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub draft_id: DraftId,
    pub thread_id: ThreadId,
    /// The hidden comment holding this draft in its thread.
    pub comment_id: CommentId,
    generated_text: String,
    pub current_text: String,
    pub revisions: Vec<Revision>,
    pub status: DraftStatus,
    pub provenance: Provenance,
    pub created_at: DateTime<Utc>,
    pub publish: Option<PublishRecord>,
    pub edit_metrics: Option<EditMetrics>,
    /// Whether the command asked for anonymous publication.
    #[serde(default)]
    pub requested_anonymous: bool,
}

impl Draft {
    pub fn new(
        draft_id: DraftId,
        thread_id: ThreadId,
        comment_id: CommentId,
        generated_text: String,
        provenance: Provenance,
        created_at: DateTime<Utc>,
    ) -> Self {
        Draft {
            draft_id,
            thread_id,
            comment_id,
            current_text: generated_text.clone(),
            generated_text,
            revisions: Vec::new(),
            status: DraftStatus::Pending,
            provenance,
            created_at,
            publish: None,
            edit_metrics: None,
            requested_anonymous: false,
        }
    }

    /// The provider's original output; never changes.
    pub fn generated_text(&self) -> &str {
        &self.generated_text
    }

    fn require_open(&self, action: &'static str) -> Result<(), DraftError> {
        if self.status.is_open() {
            Ok(())
        } else {
            Err(DraftError::InvalidTransition {
                from: self.status,
                action,
            })
        }
    }

    /// Replaces the current text. Returns whether anything changed.
    pub fn edit(&mut self, new_text: &str, at: DateTime<Utc>) -> Result<bool, DraftError> {
        self.require_open("edit")?;
        if new_text == self.current_text {
            return Ok(false);
        }
        self.current_text = new_text.to_string();
        self.revisions.push(Revision {
            at,
            text: new_text.to_string(),
        });
        self.status = DraftStatus::Edited;
        Ok(true)
    }

    pub fn mark_published(&mut self, record: PublishRecord, metrics: EditMetrics) -> Result<(), DraftError> {
        self.require_open("publish")?;
        self.status = DraftStatus::Published;
        self.publish = Some(record);
        self.edit_metrics = Some(metrics);
        Ok(())
    }

    pub fn discard(&mut self) -> Result<(), DraftError> {
        self.require_open("discard")?;
        self.status = DraftStatus::Discarded;
        Ok(())
    }

    /// Checks a publish is allowed without changing anything.
    pub fn check_publishable(&self) -> Result<(), DraftError> {
        self.require_open("publish")
    }
}
