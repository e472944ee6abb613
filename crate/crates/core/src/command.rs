//! Instructor hashtag commands.
//!
//! Instructors drive the assistant by typing hashtags into an ordinary forum
//! comment:
//!
//! ```text
//! #help
//! #reply #prev 2 292 473
//! #reply #related 42,44 #anon
//! #anon #reply Start off by explaining where the possible issue is.
//! ```
//!
//! [`scan`] finds the hashtags, [`validate`] checks that they form exactly one
//! well-formed command, and [`classify`] names the combination so usage can be
//! tabulated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::ItemId;

/// The five recognised hashtags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hashtag {
    Reply,
    Anon,
    Related,
    Prev,
    Help,
}

impl Hashtag {
    pub const ALL: [Hashtag; 5] = [
        Hashtag::Reply,
        Hashtag::Anon,
        Hashtag::Related,
        Hashtag::Prev,
        Hashtag::Help,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Hashtag::Reply => "#reply",
            Hashtag::Anon => "#anon",
            Hashtag::Related => "#related",
            Hashtag::Prev => "#prev",
            Hashtag::Help => "#help",
        }
    }

    fn from_token(token: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|tag| tag.as_str().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for Hashtag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    /// Free-text guidance for the draft; empty for a bare `#reply`.
    pub instructions: String,
}

/// Everything [`scan`] found in one comment, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandInvocation {
    pub help: bool,
    pub reply: Option<Reply>,
    pub prev_refs: Vec<ItemId>,
    pub related_refs: Vec<ItemId>,
    pub anon: bool,
    pub raw_text: String,
    /// Hashtags in source order, duplicates included.
    pub tags: Vec<Hashtag>,
}

/// A command that passed [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum ValidatedCommand {
    Help,
    Reply {
        instructions: String,
        prev: Vec<ItemId>,
        related: Vec<ItemId>,
        anon: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("orphan modifier: {0} needs #reply")]
    OrphanModifier(Hashtag),
    #[error("help is exclusive: #help cannot be combined with other prompts")]
    HelpExclusive,
    #[error("duplicate prompt: {0} appears more than once")]
    DuplicatePrompt(Hashtag),
    #[error("missing context identifiers after {0}")]
    MissingContextIds(Hashtag),
}

impl CommandError {
    /// The hashtag the error is about, if any.
    pub fn hashtag(&self) -> Hashtag {
        match self {
            CommandError::OrphanModifier(tag)
            | CommandError::DuplicatePrompt(tag)
            | CommandError::MissingContextIds(tag) => *tag,
            CommandError::HelpExclusive => Hashtag::Help,
        }
    }
}

/// Canonical name of a hashtag combination, e.g. `reply∅ anon related`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CombinationLabel(String);

impl CombinationLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CombinationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CombinationLabel {
    fn from(s: &str) -> Self {
        CombinationLabel(s.to_string())
    }
}

struct Token<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    start: s,
                    end: i,
                    text: &text[s..i],
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            start: s,
            end: text.len(),
            text: &text[s..],
        });
    }
    out
}

/// Parses a token such as `42`, `42,44` or `2,` into identifiers.
fn identifiers(token: &str) -> Option<Vec<ItemId>> {
    if !token.bytes().all(|b| b.is_ascii_digit() || b == b',') {
        return None;
    }
    let ids: Option<Vec<ItemId>> = token
        .split(',')
        .filter(|part| !part.is_empty())
        .map(|part| part.parse::<u64>().ok().map(ItemId))
        .collect();
    ids.filter(|ids| !ids.is_empty())
}

/// Finds instructor hashtags in `comment_text`.
///
/// Returns `None` when no recognised hashtag appears. Hashtags are whole
/// whitespace-delimited tokens, matched case-insensitively. The instructions
/// of `#reply` run verbatim up to the next hashtag; `#prev` and `#related`
/// take the run of digit tokens (space and/or comma separated) after them.
pub fn scan(comment_text: &str) -> Option<CommandInvocation> {
    let toks = tokens(comment_text);
    let tagged: Vec<(usize, Hashtag)> = toks
        .iter()
        .enumerate()
        .filter_map(|(i, t)| Hashtag::from_token(t.text).map(|tag| (i, tag)))
        .collect();
    if tagged.is_empty() {
        return None;
    }

    let mut inv = CommandInvocation {
        help: false,
        reply: None,
        prev_refs: Vec::new(),
        related_refs: Vec::new(),
        anon: false,
        raw_text: comment_text.to_string(),
        tags: tagged.iter().map(|&(_, tag)| tag).collect(),
    };

    for (n, &(pos, tag)) in tagged.iter().enumerate() {
        let next_tag = tagged.get(n + 1).map(|&(p, _)| p).unwrap_or(toks.len());
        match tag {
            Hashtag::Help => inv.help = true,
            Hashtag::Anon => inv.anon = true,
            Hashtag::Reply => {
                let from = toks[pos].end;
                let to = toks.get(next_tag).map(|t| t.start).unwrap_or(comment_text.len());
                let instructions = comment_text[from..to].trim().to_string();
                // A repeated #reply keeps the first instructions; validate rejects it anyway.
                if inv.reply.is_none() {
                    inv.reply = Some(Reply { instructions });
                }
            }
            Hashtag::Prev | Hashtag::Related => {
                let refs = toks[pos + 1..next_tag]
                    .iter()
                    .map_while(|t| identifiers(t.text))
                    .flatten();
                if tag == Hashtag::Prev {
                    inv.prev_refs.extend(refs);
                } else {
                    inv.related_refs.extend(refs);
                }
            }
        }
    }
    Some(inv)
}

/// Checks that an invocation is exactly one well-formed command.
pub fn validate(inv: &CommandInvocation) -> Result<ValidatedCommand, CommandError> {
    for (i, tag) in inv.tags.iter().enumerate() {
        if inv.tags[..i].contains(tag) {
            return Err(CommandError::DuplicatePrompt(*tag));
        }
    }
    let has = |tag: Hashtag| inv.tags.contains(&tag);
    if has(Hashtag::Prev) && inv.prev_refs.is_empty() {
        return Err(CommandError::MissingContextIds(Hashtag::Prev));
    }
    if has(Hashtag::Related) && inv.related_refs.is_empty() {
        return Err(CommandError::MissingContextIds(Hashtag::Related));
    }
    if inv.help {
        if inv.tags.len() > 1 {
            return Err(CommandError::HelpExclusive);
        }
        return Ok(ValidatedCommand::Help);
    }
    match &inv.reply {
        Some(reply) => Ok(ValidatedCommand::Reply {
            instructions: reply.instructions.clone(),
            prev: inv.prev_refs.clone(),
            related: inv.related_refs.clone(),
            anon: inv.anon,
        }),
        None => {
            // Source order decides which orphan is reported.
            let orphan = inv.tags.first().copied().unwrap_or(Hashtag::Anon);
            Err(CommandError::OrphanModifier(orphan))
        }
    }
}

/// Scans and validates in one step. `Ok(None)` means the text holds no command.
pub fn parse(comment_text: &str) -> Result<Option<ValidatedCommand>, CommandError> {
    scan(comment_text).map(|inv| validate(&inv)).transpose()
}

/// Names the hashtag combination, independent of the order it was typed in.
pub fn classify(cmd: &ValidatedCommand) -> CombinationLabel {
    match cmd {
        ValidatedCommand::Help => CombinationLabel("help".into()),
        ValidatedCommand::Reply {
            instructions,
            prev,
            related,
            anon,
        } => {
            let mut parts = vec![if instructions.is_empty() {
                "reply∅"
            } else {
                "reply■"
            }];
            if *anon {
                parts.push("anon");
            }
            if !related.is_empty() {
                parts.push("related");
            }
            if !prev.is_empty() {
                parts.push("prev");
            }
            CombinationLabel(parts.join(" "))
        }
    }
}

fn join_ids(ids: &[ItemId]) -> String {
    ids.iter().map(|id| id.0.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for ValidatedCommand {
    /// Canonical comment text; scanning it yields the same command back.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidatedCommand::Help => f.write_str("#help"),
            ValidatedCommand::Reply {
                instructions,
                prev,
                related,
                anon,
            } => {
                f.write_str("#reply")?;
                if !instructions.is_empty() {
                    write!(f, " {instructions}")?;
                }
                if *anon {
                    f.write_str(" #anon")?;
                }
                if !related.is_empty() {
                    write!(f, " #related {}", join_ids(related))?;
                }
                if !prev.is_empty() {
                    write!(f, " #prev {}", join_ids(prev))?;
                }
                Ok(())
            }
        }
    }
}

impl ValidatedCommand {
    pub fn is_help(&self) -> bool {
        matches!(self, ValidatedCommand::Help)
    }
}

/// Prompt reference printed under every `#help` result.
pub const CHEAT_SHEET: &str = "\
#reply [instructions]   draft an answer (required for drafting)
#prev <ids>             add previous posts, e.g. #prev 2 292 473
#related <ids>          add course material, e.g. #related 42,44
#anon                   publish under an anonymous alias
#help                   list the most relevant context items";
