//! Instructor-moderated drafting assistant for course discussion forums.
//!
//! Instructors type hashtag commands into a thread. `#help` retrieves related
//! forum posts and course material; `#reply` asks a language model for a draft
//! answer that only instructors can see until someone publishes it. Every
//! command and every edit is logged for later analysis.
//!
//! [`desk::Desk`] ties the pieces together; [`transcript`] and [`replay`]
//! record and re-run sessions deterministically.

pub mod analytics;
pub mod command;
pub mod config;
pub mod desk;
pub mod drafting;
pub mod forum;
pub mod provider;
pub mod replay;
pub mod retrieval;
pub mod transcript;

pub use command::{parse, CombinationLabel, CommandError, ValidatedCommand};
pub use config::Config;
pub use desk::{Action, Desk, DeskConfig, DeskError, ReplyPlan};
