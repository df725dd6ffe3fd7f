use serde::Serialize;

use crate::error::Result;
use crate::guessing::{GridValue, Guesser};
use crate::lazy_greedy::{self, LazyGreedyConfig, LazyGreedyResult, TARGET_TOLERANCE};
use crate::multilinear::{Multilinear, SparseFractionalPoint};
use crate::oracle::CountingOracle;

/// Relative slack applied to every threshold comparison.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

fn meets(value: f64, threshold: f64) -> bool {
    value >= threshold - THRESHOLD_TOLERANCE * threshold.abs().max(1.0)
}

fn reached(gain: f64, target: f64) -> bool {
    gain >= target - TARGET_TOLERANCE * target.abs().max(1.0)
}

/// Shape of one run of the phase engine.
#[derive(Debug, Clone, Serialize)]
pub struct EngineConfig {
    pub epsilon: f64,
    pub t: usize,
    pub r: usize,
    pub phases: usize,
    pub k_max: usize,
    /// Record the shadow density check inside the greedy stage.
    pub shadow: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Opt1Record {
    pub iteration: usize,
    /// `None` when the guesser skipped the iteration.
    pub threshold: Option<GridValue>,
    pub picked: Option<usize>,
    /// No element met the threshold.
    pub empty: bool,
    /// The picked element already had a positive coordinate.
    pub repeated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Opt2Record {
    pub iteration: usize,
    pub threshold: GridValue,
    pub picked: Option<usize>,
    pub empty: bool,
    /// `F(z) − F(z⁽⁰⁾)` after the iteration.
    pub gain: f64,
}

/// What one phase did, with enough state to re-check the analysis.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseTrace {
    pub phase: usize,
    /// Elements raised by `ε` in the fractional stage.
    pub a: Vec<usize>,
    /// Elements joined integrally in the large-value stage.
    pub b: Vec<usize>,
    /// Elements joined by the greedy stage.
    pub c: Vec<usize>,
    pub opt1: Vec<Opt1Record>,
    pub big_w: GridValue,
    /// `ε(1 − 12ε)·W`.
    pub target: f64,
    /// Number of large-value iterations allowed by the `w` guesses; `None`
    /// when `W = 0` skipped the stage.
    pub r_p: Option<usize>,
    pub opt2: Vec<Opt2Record>,
    pub ended_early: bool,
    /// Elements removed before the greedy stage for having too large a gain.
    pub filtered: Vec<usize>,
    pub greedy: Option<LazyGreedyResult>,
    /// Some fractional-stage pick already had a positive coordinate.
    pub repeated_selection: bool,
    /// `x_{p−1}`, `y^{(p,t)}`, the point after the large-value stage, `x_p`.
    pub start: SparseFractionalPoint,
    pub after_opt1: SparseFractionalPoint,
    pub after_opt2: SparseFractionalPoint,
    pub end: SparseFractionalPoint,
    pub f_start: f64,
    pub f_after_opt1: f64,
    pub f_after_opt2: f64,
    pub f_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FractionalOutcome {
    pub x: SparseFractionalPoint,
    pub value: f64,
    pub phases: Vec<PhaseTrace>,
    pub queries: u64,
}

impl FractionalOutcome {
    pub fn max_support(&self) -> usize {
        self.phases
            .iter()
            .map(|p| p.end.support_size().max(p.after_opt1.support_size()))
            .max()
            .unwrap_or(0)
    }
}

/// Cheapest element whose gain meets `threshold`, lowest id on cost ties.
fn cheapest_meeting(
    candidates: &[usize],
    gains: &[f64],
    costs: &[f64],
    threshold: f64,
) -> Option<usize> {
    candidates
        .iter()
        .zip(gains)
        .filter(|&(_, &g)| meets(g, threshold))
        .map(|(&e, _)| e)
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)))
}

/// Runs all phases from `x = 0`, drawing thresholds from `guesser`.
pub fn knapsack_guess(
    oracle: &CountingOracle<'_>,
    costs: &[f64],
    guesser: &mut dyn Guesser,
    cfg: &EngineConfig,
) -> Result<FractionalOutcome> {
    let start_queries = oracle.query_count();
    let eval = Multilinear::new(oracle).with_k_max(cfg.k_max);
    let quiet = Multilinear::new(oracle.inner()).with_k_max(cfg.k_max);
    let n = costs.len();
    let eps = cfg.epsilon;
    let mut x = SparseFractionalPoint::zero();
    let mut phases = Vec::with_capacity(cfg.phases);

    for p in 1..=cfg.phases {
        let start = x.clone();
        let f_start = quiet.eval_exact(&start)?;

        // fractional stage
        let mut y = start.clone();
        let mut a = Vec::new();
        let mut opt1 = Vec::with_capacity(cfg.t);
        let mut repeated_selection = false;
        for i in 1..=cfg.t {
            let threshold = guesser.opt1_threshold(p, i, &y)?;
            let mut record = Opt1Record {
                iteration: i,
                threshold,
                picked: None,
                empty: false,
                repeated: false,
            };
            if let Some(v) = threshold {
                let candidates: Vec<usize> = (0..n)
                    .filter(|e| !a.contains(e) && y.coordinate(*e) < 1.0)
                    .collect();
                let gains = eval.marginals(&y, &candidates)?;
                match cheapest_meeting(&candidates, &gains, costs, v.value()) {
                    Some(e) => {
                        let current = y.coordinate(e);
                        record.repeated = current > 0.0;
                        repeated_selection |= record.repeated;
                        y = y.increase_coordinate(e, eps.min(1.0 - current))?;
                        a.push(e);
                        record.picked = Some(e);
                    }
                    None => record.empty = true,
                }
            }
            guesser.opt1_selected(p, i, record.picked)?;
            opt1.push(record);
        }
        let after_opt1 = y.clone();
        let f_after_opt1 = quiet.eval_exact(&after_opt1)?;

        let big_w = guesser.opt2_total(p, &y)?;
        let mut trace = PhaseTrace {
            phase: p,
            a,
            b: Vec::new(),
            c: Vec::new(),
            opt1,
            big_w,
            target: eps * (1.0 - 12.0 * eps) * big_w.value(),
            r_p: None,
            opt2: Vec::new(),
            ended_early: false,
            filtered: Vec::new(),
            greedy: None,
            repeated_selection,
            start,
            after_opt1: after_opt1.clone(),
            after_opt2: after_opt1.clone(),
            end: after_opt1.clone(),
            f_start,
            f_after_opt1,
            f_after_opt2: f_after_opt1,
            f_end: f_after_opt1,
        };
        if big_w.is_zero() {
            x = y;
            phases.push(trace);
            continue;
        }

        // large-value stage
        let w_big = big_w.value();
        let stop_below = eps * (1.0 - eps) * w_big / cfg.r as f64;
        let mut z = y;
        let f_z0 = eval.eval_exact(&z)?;
        let mut gain = 0.0;
        let mut r_p = cfg.r;
        for i in 0..=cfg.r {
            let w = guesser.opt2_threshold(p, i + 1, &z)?;
            if w.value() <= stop_below * (1.0 + THRESHOLD_TOLERANCE) {
                r_p = i;
                break;
            }
            if i == cfg.r {
                break;
            }
            let candidates: Vec<usize> = (0..n).filter(|e| !z.integral().contains(e)).collect();
            let gains = eval.marginals(&z, &candidates)?;
            let picked = cheapest_meeting(&candidates, &gains, costs, w.value());
            if let Some(b) = picked {
                z = z.join(&[b]);
                trace.b.push(b);
                gain = eval.eval_exact(&z)? - f_z0;
            }
            guesser.opt2_selected(p, i + 1, picked)?;
            trace.opt2.push(Opt2Record {
                iteration: i + 1,
                threshold: w,
                picked,
                empty: picked.is_none(),
                gain,
            });
            if picked.is_some() && reached(gain, trace.target) {
                trace.ended_early = true;
                r_p = i + 1;
                break;
            }
        }
        trace.r_p = Some(r_p);
        trace.after_opt2 = z.clone();
        trace.f_after_opt2 = quiet.eval_exact(&z)?;

        // greedy stage
        if !trace.ended_early && !reached(gain, trace.target) {
            let cut = eps * w_big / cfg.r as f64;
            let pool: Vec<usize> = (0..n).filter(|e| !z.integral().contains(e)).collect();
            let gains = eval.marginals(&z, &pool)?;
            let mut keep = Vec::with_capacity(pool.len());
            for (&e, &g) in pool.iter().zip(&gains) {
                if meets(g, cut) {
                    trace.filtered.push(e);
                } else {
                    keep.push(e);
                }
            }
            let mut gcfg = LazyGreedyConfig::new(eps, n, trace.target - gain).with_k_max(cfg.k_max);
            if cfg.shadow {
                gcfg = gcfg.with_shadow();
            }
            let result = lazy_greedy::run(oracle, &z, costs, &keep, &gcfg)?;
            z = z.join(&result.selected);
            trace.c = result.selected.clone();
            trace.greedy = Some(result);
        }
        trace.f_end = quiet.eval_exact(&z)?;
        trace.end = z.clone();
        x = z;
        phases.push(trace);
    }

    let value = quiet.eval_exact(&x)?;
    Ok(FractionalOutcome {
        x,
        value,
        phases,
        queries: oracle.query_count() - start_queries,
    })
}
