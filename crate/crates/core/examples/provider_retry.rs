//! Wraps a flaky chat provider in the retry layer. Transient failures are
//! retried with exponential backoff; the sleeper only records the delays.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use draftdesk::drafting::PromptPackage;
use draftdesk::provider::{ChatProvider, ProviderError, RecordingSleeper, RetryPolicy, Retrying};

struct Flaky {
    failures: u32,
    calls: AtomicU32,
}

impl ChatProvider for Flaky {
    fn model(&self) -> &str {
        "flaky"
    }

    fn chat_complete(&self, _: &PromptPackage) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.failures {
            Err(ProviderError::Status {
                status: 503,
                message: "overloaded".into(),
            })
        } else {
            Ok("Here is a draft.".into())
        }
    }
}

fn main() {
    let policy = RetryPolicy {
        max_retries: 3,
        backoff_base: Duration::from_millis(500),
        factor: 2,
    };
    let package = PromptPackage {
        system_preamble: "You help answer course forum questions.".into(),
        context_blocks: Vec::new(),
        question: "Why does my build fail?".into(),
        instructions: String::new(),
        truncation_notes: Vec::new(),
    };
    for failures in [0, 2, 5] {
        let sleeper = Arc::new(RecordingSleeper::default());
        let chat = Retrying::new(
            Flaky {
                failures,
                calls: AtomicU32::new(0),
            },
            policy,
            sleeper.clone(),
        );
        let result = chat.chat_complete(&package);
        println!("{failures} failures -> {result:?}");
        println!("  waited {:?}", sleeper.delays());
    }
}
