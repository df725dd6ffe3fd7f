use std::sync::atomic::{AtomicU64, Ordering};

use super::objective::SetFunction;

/// Wraps a set function and counts every evaluation.
///
/// The counter is atomic so a single oracle can be shared by concurrent
/// read-only callers.
pub struct CountingOracle<'a> {
    inner: &'a dyn SetFunction,
    queries: AtomicU64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(inner: &'a dyn SetFunction) -> Self {
        CountingOracle {
            inner,
            queries: AtomicU64::new(0),
        }
    }

    pub fn value(&self, set: &[usize]) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.value(set)
    }

    pub fn ground_size(&self) -> usize {
        self.inner.ground_size()
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// The wrapped function, for evaluations that must not be counted
    /// (shadow checks, analysis bookkeeping).
    pub fn inner(&self) -> &'a dyn SetFunction {
        self.inner
    }
}

impl SetFunction for CountingOracle<'_> {
    fn ground_size(&self) -> usize {
        self.inner.ground_size()
    }

    fn value(&self, set: &[usize]) -> f64 {
        CountingOracle::value(self, set)
    }
}
