use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

/// Source of event timestamps (UTC milliseconds).
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock for simulations: starts at `start` and advances by
/// `step` on every reading.
#[derive(Debug)]
pub struct LogicalClock {
    next: AtomicU64,
    step: u64,
}

impl LogicalClock {
    pub fn new(start: u64, step: u64) -> Self {
        LogicalClock {
            next: AtomicU64::new(start),
            step,
        }
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::Relaxed)
    }
}
