//! Cooperative deadlines and cancellation.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Longest slice slept by [`Deadline::sleep`] before re-checking expiry.
pub const SLEEP_SLICE: Duration = Duration::from_millis(5);

#[derive(Debug, Clone)]
pub struct Deadline {
    start: Instant,
    at: Option<Instant>,
    cancelled: Arc<AtomicBool>,
}

impl Deadline {
    pub fn none() -> Self {
        Deadline { start: Instant::now(), at: None, cancelled: Arc::new(AtomicBool::new(false)) }
    }

    pub fn after(budget: Duration) -> Self {
        let start = Instant::now();
        Deadline { start, at: Some(start + budget), cancelled: Arc::new(AtomicBool::new(false)) }
    }

    pub fn from_secs(secs: f64) -> Self {
        if secs.is_finite() {
            Self::after(Duration::from_secs_f64(secs.max(0.0)))
        } else {
            Self::none()
        }
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn expired(&self) -> bool {
        if self.cancelled.load(Ordering::Relaxed) {
            return true;
        }
        match self.at {
            Some(at) => Instant::now() >= at,
            None => false,
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn budget(&self) -> Option<Duration> {
        self.at.map(|at| at - self.start)
    }

    /// Sleeps for `d` in short slices, returning early once the deadline
    /// expires. Returns true if the full duration elapsed.
    pub fn sleep(&self, d: Duration) -> bool {
        let end = Instant::now() + d;
        loop {
            if self.expired() {
                return false;
            }
            let now = Instant::now();
            if now >= end {
                return true;
            }
            std::thread::sleep((end - now).min(SLEEP_SLICE));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_is_expired() {
        assert!(Deadline::after(Duration::ZERO).expired());
        assert!(!Deadline::none().expired());
    }

    #[test]
    fn sleep_returns_promptly_on_expiry() {
        let d = Deadline::after(Duration::from_millis(20));
        let t = Instant::now();
        assert!(!d.sleep(Duration::from_secs(5)));
        assert!(t.elapsed() < Duration::from_millis(80));
    }

    #[test]
    fn cancel_is_shared_between_clones() {
        let d = Deadline::none();
        let c = d.clone();
        c.cancel();
        assert!(d.expired());
    }
}
