//! Density greedy with approximate lazy evaluations.
//!
//! Elements sit in a max-priority queue keyed by cached density
//! `v(e)/c(e)`. The top entry is re-evaluated against the current solution; it
//! is accepted when the fresh gain is still within a `(1-ε)` factor of the
//! cached one, otherwise its key is refreshed and it goes back into the queue.
//! An element refreshed more than `⌊2·ln(n/ε)/ε⌋` times is discarded: by then
//! its gain has shrunk below `(ε/n)²` of its initial value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::multilinear::{Multilinear, SparseFractionalPoint, DEFAULT_K_MAX};
use crate::oracle::CountingOracle;

/// Relative slack of the stopping test `gain ≥ W`.
pub const TARGET_TOLERANCE: f64 = 1e-9;
const ZERO_GAIN: f64 = 1e-12;

/// `⌊2·ln(n/ε)/ε⌋`, the number of refreshes after which an element is dropped.
pub fn update_cap(n: usize, epsilon: f64) -> u32 {
    let raw = 2.0 * (n.max(1) as f64 / epsilon).ln() / epsilon;
    raw.max(0.0).floor() as u32
}

#[derive(Debug, Clone)]
pub struct LazyGreedyConfig {
    pub epsilon: f64,
    /// Ground-set size used in the refresh cap.
    pub n: usize,
    /// Stop once the accumulated gain reaches this value.
    pub target: f64,
    /// When set, popped elements that no longer fit are dropped unselected.
    pub budget: Option<f64>,
    /// Recompute every queued density at each acceptance and record whether
    /// the accepted element is within `(1-ε)` of the best (uncounted).
    pub shadow: bool,
    pub k_max: usize,
}

impl LazyGreedyConfig {
    pub fn new(epsilon: f64, n: usize, target: f64) -> Self {
        LazyGreedyConfig {
            epsilon,
            n,
            target,
            budget: None,
            shadow: false,
            k_max: DEFAULT_K_MAX,
        }
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_shadow(mut self) -> Self {
        self.shadow = true;
        self
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reinsert,
    Discard,
    /// Fresh gain is zero: dropped without selection.
    ZeroGain,
    /// Does not fit the remaining budget: dropped without evaluation.
    OverBudget,
}

#[derive(Debug, Clone, Serialize)]
pub struct PopRecord {
    pub element: usize,
    pub cached_gain: f64,
    /// `None` when the element was dropped before being re-evaluated.
    pub fresh_gain: Option<f64>,
    pub updates: u32,
    pub decision: Decision,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowCheck {
    pub element: usize,
    pub fresh_density: f64,
    pub best_density: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscardRecord {
    pub element: usize,
    pub initial_gain: f64,
    pub last_gain: f64,
    pub updates: u32,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LazyGreedyResult {
    pub selected: Vec<usize>,
    pub discarded: Vec<DiscardRecord>,
    pub gain_achieved: f64,
    pub cost: f64,
    pub queries_used: u64,
    pub transcript: Vec<PopRecord>,
    pub shadow: Vec<ShadowCheck>,
}

impl LazyGreedyResult {
    pub fn discarded_ids(&self) -> Vec<usize> {
        self.discarded.iter().map(|d| d.element).collect()
    }
}

#[derive(PartialEq)]
struct Entry {
    key: f64,
    element: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on key; equal keys pop the lowest id first
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.element.cmp(&self.element))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn reached(gain: f64, target: f64) -> bool {
    gain >= target - TARGET_TOLERANCE * target.abs().max(1.0)
}

/// Runs lazy density greedy on top of `x` over `candidates` until the gain
/// `F(x ∨ 1_S) − F(x)` reaches `cfg.target` or the queue empties.
pub fn run(
    oracle: &CountingOracle<'_>,
    x: &SparseFractionalPoint,
    costs: &[f64],
    candidates: &[usize],
    cfg: &LazyGreedyConfig,
) -> Result<LazyGreedyResult> {
    if !(cfg.target >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "greedy target must be nonnegative, got {}",
            cfg.target
        )));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1), got {}",
            cfg.epsilon
        )));
    }
    let mut result = LazyGreedyResult::default();
    if candidates.is_empty() || reached(0.0, cfg.target) {
        return Ok(result);
    }

    let start_queries = oracle.query_count();
    let eval = Multilinear::new(oracle).with_k_max(cfg.k_max);
    let shadow_eval = Multilinear::new(oracle.inner()).with_k_max(cfg.k_max);
    let cap = update_cap(cfg.n, cfg.epsilon);

    let mut pool: Vec<usize> = candidates.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let slot = |e: usize| pool.binary_search(&e).expect("element is a candidate");

    let base = eval.eval_exact(x)?;
    let mut cached = Vec::with_capacity(pool.len());
    let mut heap = BinaryHeap::with_capacity(pool.len());
    for &e in &pool {
        let gain = eval.eval_join(x, &[e])? - base;
        cached.push(gain);
        heap.push(Entry {
            key: gain / costs[e],
            element: e,
        });
    }
    let initial = cached.clone();
    let mut updates = vec![0u32; pool.len()];
    let mut current = base;
    let mut joined: Vec<usize> = Vec::new();

    while let Some(Entry { element: e, .. }) = heap.pop() {
        let s = slot(e);
        if let Some(budget) = cfg.budget {
            if result.cost + costs[e] > budget + ZERO_GAIN {
                result.transcript.push(PopRecord {
                    element: e,
                    cached_gain: cached[s],
                    fresh_gain: None,
                    updates: updates[s],
                    decision: Decision::OverBudget,
                });
                continue;
            }
        }

        joined.push(e);
        let with_e = eval.eval_join(x, &joined)?;
        joined.pop();
        let fresh = with_e - current;
        updates[s] += 1;

        let decision = if fresh <= ZERO_GAIN * current.abs().max(1.0) {
            Decision::ZeroGain
        } else if fresh >= (1.0 - cfg.epsilon) * cached[s] {
            Decision::Accept
        } else if updates[s] <= cap {
            Decision::Reinsert
        } else {
            Decision::Discard
        };
        result.transcript.push(PopRecord {
            element: e,
            cached_gain: cached[s],
            fresh_gain: Some(fresh),
            updates: updates[s],
            decision,
        });

        match decision {
            Decision::Accept => {
                if cfg.shadow {
                    let mut best = fresh / costs[e];
                    for entry in heap.iter() {
                        joined.push(entry.element);
                        let g = shadow_eval.eval_join(x, &joined)? - current;
                        joined.pop();
                        best = best.max(g / costs[entry.element]);
                    }
                    let density = fresh / costs[e];
                    result.shadow.push(ShadowCheck {
                        element: e,
                        fresh_density: density,
                        best_density: best,
                        passed: density >= (1.0 - cfg.epsilon) * best * (1.0 - 1e-12),
                    });
                }
                cached[s] = fresh;
                joined.push(e);
                result.selected.push(e);
                result.cost += costs[e];
                current = with_e;
                if reached(current - base, cfg.target) {
                    break;
                }
            }
            Decision::Reinsert => {
                cached[s] = fresh;
                heap.push(Entry {
                    key: fresh / costs[e],
                    element: e,
                });
            }
            Decision::Discard => {
                cached[s] = fresh;
                result.discarded.push(DiscardRecord {
                    element: e,
                    initial_gain: initial[s],
                    last_gain: fresh,
                    updates: updates[s],
                });
            }
            Decision::ZeroGain | Decision::OverBudget => {}
        }
    }

    result.gain_achieved = current - base;
    result.queries_used = oracle.query_count() - start_queries;
    Ok(result)
}
