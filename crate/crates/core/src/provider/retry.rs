use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::{ChatProvider, EmbeddingProvider, ProviderError};
use crate::drafting::PromptPackage;
use crate::retrieval::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * factor^retry`.
    pub fn delay(&self, retry: u32) -> Duration {
        let mult = self.factor.saturating_pow(retry);
        self.backoff_base.saturating_mul(mult)
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, delay: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, delay: Duration) {
        std::thread::sleep(delay);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, delay: Duration) {
        self.delays.lock().unwrap().push(delay);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    /// 1-based.
    pub number: u32,
    /// Backoff slept before this attempt.
    pub delay_before: Duration,
    pub error: Option<ProviderError>,
}

#[derive(Debug)]
pub struct RetryOutcome<T> {
    pub result: Result<T, ProviderError>,
    pub attempts: Vec<Attempt>,
}

/// Runs `op` until it succeeds, fails permanently, or runs out of retries.
pub fn call_with_retry<T>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    mut op: impl FnMut() -> Result<T, ProviderError>,
) -> RetryOutcome<T> {
    let mut attempts = Vec::new();
    let mut delay_before = Duration::ZERO;
    loop {
        let number = attempts.len() as u32 + 1;
        match op() {
            Ok(v) => {
                attempts.push(Attempt {
                    number,
                    delay_before,
                    error: None,
                });
                return RetryOutcome {
                    result: Ok(v),
                    attempts,
                };
            }
            Err(err) => {
                attempts.push(Attempt {
                    number,
                    delay_before,
                    error: Some(err.clone()),
                });
                let retries_used = number - 1;
                if !err.is_retryable() {
                    return RetryOutcome {
                        result: Err(err),
                        attempts,
                    };
                }
                if retries_used >= policy.max_retries {
                    return RetryOutcome {
                        result: Err(ProviderError::Exhausted {
                            attempts: number,
                            last: Box::new(err),
                        }),
                        attempts,
                    };
                }
                delay_before = policy.delay(retries_used);
                tracing::warn!(attempt = number, delay_ms = delay_before.as_millis() as u64, error = %err, "provider call failed, retrying");
                sleeper.sleep(delay_before);
            }
        }
    }
}

/// Adds retries to any provider. The attempts of the most recent call are
/// kept for inspection.
pub struct Retrying<P> {
    inner: P,
    policy: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    last_attempts: Mutex<Vec<Attempt>>,
}

impl<P> Retrying<P> {
    pub fn new(inner: P, policy: RetryPolicy, sleeper: Arc<dyn Sleeper>) -> Self {
        Retrying {
            inner,
            policy,
            sleeper,
            last_attempts: Mutex::new(Vec::new()),
        }
    }

    pub fn last_attempts(&self) -> Vec<Attempt> {
        self.last_attempts.lock().unwrap().clone()
    }

    fn run<T>(&self, op: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let outcome = call_with_retry(&self.policy, self.sleeper.as_ref(), op);
        *self.last_attempts.lock().unwrap() = outcome.attempts;
        outcome.result
    }
}

impl<P: ChatProvider> ChatProvider for Retrying<P> {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn chat_complete(&self, package: &PromptPackage) -> Result<String, ProviderError> {
        self.run(|| self.inner.chat_complete(package))
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for Retrying<P> {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        super::check_batch(texts)?;
        self.run(|| self.inner.embed_batch(texts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> RetryPolicy {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_millis(100),
            factor: 2,
        }
    }

    #[test]
    fn delays_grow_geometrically() {
        let p = policy();
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(400));
        // no overflow panic
        let _ = p.delay(200);
    }

    #[test]
    fn exhaustion_caps_attempts() {
        let sleeper = RecordingSleeper::default();
        let out = call_with_retry::<()>(&policy(), &sleeper, || Err(ProviderError::Timeout));
        assert_eq!(out.attempts.len(), 4);
        assert!(matches!(out.result, Err(ProviderError::Exhausted { attempts: 4, .. })));
        assert_eq!(sleeper.delays().len(), 3);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let sleeper = RecordingSleeper::default();
        let out = call_with_retry::<()>(&policy(), &sleeper, || {
            Err(ProviderError::Status {
                status: 400,
                message: "bad".into(),
            })
        });
        assert_eq!(out.attempts.len(), 1);
        assert!(sleeper.delays().is_empty());
    }

    #[test]
    fn zero_retries_means_one_attempt() {
        let sleeper = RecordingSleeper::default();
        let p = RetryPolicy {
            max_retries: 0,
            ..policy()
        };
        let out = call_with_retry::<()>(&p, &sleeper, || Err(ProviderError::Timeout));
        assert_eq!(out.attempts.len(), 1);
    }
}
