//! Exponential backoff with full jitter.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

/// How a failed attempt should be treated.
pub enum Attempt<E> {
    /// Give up immediately.
    Fatal(E),
    /// Retry after backoff; a server-provided minimum wait may be given.
    Retry(E, Option<Duration>),
}

impl RetryPolicy {
    pub fn no_retry() -> Self {
        Self {
            max_attempts: 1,
            ..Self::default()
        }
    }

    /// Upper bound of the jitter window before attempt `attempt + 1`
    /// (`attempt` counts from 0): `base * 2^attempt`, capped.
    pub fn backoff_cap(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(32))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }

    /// Calls `op` until it succeeds, fails fatally, or attempts run out.
    /// The last error is returned on exhaustion.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Result<T, Attempt<E>>) -> Result<T, E> {
        let attempts = self.max_attempts.max(1);
        let mut rng = rand::thread_rng();
        for attempt in 0..attempts {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e, retry_after)) => {
                    if attempt + 1 == attempts {
                        return Err(e);
                    }
                    let cap = self.backoff_cap(attempt).as_millis() as u64;
                    let jitter = Duration::from_millis(if cap == 0 { 0 } else { rng.gen_range(0..=cap) });
                    std::thread::sleep(jitter.max(retry_after.unwrap_or_default()));
                }
            }
        }
        unreachable!("loop returns on the final attempt")
    }
}
