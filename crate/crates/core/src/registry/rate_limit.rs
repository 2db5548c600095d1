use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Blocking limiter shared by all fetch workers.
///
/// Each caller reserves the next free slot under the lock and then sleeps
/// outside it, so consecutive requests are spaced by at least `1 / rate`
/// regardless of how many threads are waiting.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `per_second` must be positive and finite.
    pub fn new(per_second: f64) -> Self {
        assert!(
            per_second.is_finite() && per_second > 0.0,
            "rate limit must be positive"
        );
        Self {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next_slot: Mutex::new(None),
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the caller may issue one request; returns the instant
    /// the slot was granted.
    pub fn acquire(&self) -> Instant {
        let slot = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
        slot
    }
}
