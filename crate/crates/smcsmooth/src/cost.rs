//! Execution-cost accounting.
//!
//! The unit of cost is one evaluation of the transition density on a new
//! argument pair; values already computed during filtering count as cached
//! and free. Counters only ever increase and support concurrent increments
//! from a parallelised particle loop.

use std::sync::atomic::{AtomicU64, Ordering};

const HIST_BUCKETS: usize = 64;

/// Tally of transition-density evaluations plus a histogram of rejection
/// trials per draw (bucketed by powers of two).
#[derive(Debug)]
pub struct CostCounter {
    density_evals: AtomicU64,
    rejection_draws: AtomicU64,
    rejection_trials: AtomicU64,
    max_trials: AtomicU64,
    histogram: [AtomicU64; HIST_BUCKETS],
}

impl Default for CostCounter {
    fn default() -> Self {
        Self {
            density_evals: AtomicU64::new(0),
            rejection_draws: AtomicU64::new(0),
            rejection_trials: AtomicU64::new(0),
            max_trials: AtomicU64::new(0),
            histogram: std::array::from_fn(|_| AtomicU64::new(0)),
        }
    }
}

impl CostCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `n` transition-density evaluations.
    #[inline]
    pub fn add_evals(&self, n: u64) {
        self.density_evals.fetch_add(n, Ordering::Relaxed);
    }

    /// Record one finished rejection draw that used `trials` trials.
    pub fn record_rejection_draw(&self, trials: u64) {
        self.rejection_draws.fetch_add(1, Ordering::Relaxed);
        self.rejection_trials.fetch_add(trials, Ordering::Relaxed);
        self.max_trials.fetch_max(trials, Ordering::Relaxed);
        let bucket = (64 - trials.leading_zeros()).min(HIST_BUCKETS as u32 - 1) as usize;
        self.histogram[bucket].fetch_add(1, Ordering::Relaxed);
    }

    /// Total transition-density evaluations so far.
    pub fn evals(&self) -> u64 {
        self.density_evals.load(Ordering::Relaxed)
    }

    /// Number of completed rejection draws.
    pub fn draws(&self) -> u64 {
        self.rejection_draws.load(Ordering::Relaxed)
    }

    /// Total rejection trials over all draws.
    pub fn trials(&self) -> u64 {
        self.rejection_trials.load(Ordering::Relaxed)
    }

    /// Largest number of trials needed by a single draw.
    pub fn max_trials(&self) -> u64 {
        self.max_trials.load(Ordering::Relaxed)
    }

    /// Histogram of trials per draw; bucket `b` counts draws whose trial
    /// count has bit length `b`.
    pub fn trials_histogram(&self) -> Vec<u64> {
        self.histogram
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }
}

/// Meeting statistics of coupled moves in the intractable-model smoothers.
#[derive(Debug, Default)]
pub struct MeetingStats {
    attempts: AtomicU64,
    meetings: AtomicU64,
}

impl MeetingStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&self, met: bool) {
        self.attempts.fetch_add(1, Ordering::Relaxed);
        if met {
            self.meetings.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    pub fn meetings(&self) -> u64 {
        self.meetings.load(Ordering::Relaxed)
    }

    /// Fraction of coupled moves that met; 0 when nothing was recorded.
    pub fn frequency(&self) -> f64 {
        let a = self.attempts();
        if a == 0 {
            0.0
        } else {
            self.meetings() as f64 / a as f64
        }
    }
}
