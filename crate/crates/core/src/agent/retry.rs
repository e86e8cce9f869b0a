use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;

/// Exponential backoff with bounded multiplicative jitter.
///
/// The delay before retry `k` (0-based) is
/// `base × factor^k × (1 + jitter × u)` with `u ∈ [0, 1)`. Keeping
/// `jitter ≤ factor − 1` makes the sequence non-decreasing for any draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            jitter: 0.5,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry `attempt` given a uniform draw `u ∈ [0, 1)`.
    pub fn delay(&self, attempt: u32, u: f64) -> Duration {
        let jitter = self.jitter.clamp(0.0, (self.factor - 1.0).max(0.0));
        let scale = self.factor.powi(attempt as i32) * (1.0 + jitter * u.clamp(0.0, 1.0));
        self.base_delay.mul_f64(scale)
    }

    pub fn sample_delay(&self, attempt: u32) -> Duration {
        self.delay(attempt, rand::rng().random::<f64>())
    }
}

/// Abstracts `thread::sleep` so tests do not wait.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().expect("sleeper lock").clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays.lock().expect("sleeper lock").push(d);
    }
}
