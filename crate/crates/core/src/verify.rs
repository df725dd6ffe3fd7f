//! Re-checks the inequalities of the analysis on an analysis-guided run.
//!
//! Every check compares a left-hand side against a bound and records both,
//! so a report shows by how much each inequality held or failed.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::{cost_of, BUDGET_TOLERANCE};
use crate::error::{Error, Result};
use crate::knapsack::{analysis_run, AnalysisRun, KnapsackParams, Mode};
use crate::multilinear::{Multilinear, SparseFractionalPoint};
use crate::oracle::SetFunction;
use crate::rounding::{self, check_grouping_invariant};

/// Value inequalities hold up to this fraction of `f(OPT)`.
pub const VALUE_TOLERANCE: f64 = 1e-7;
/// Largest ground set `verify` accepts; it needs an exhaustive optimum.
pub const VERIFY_MAX_ELEMENTS: usize = 16;
/// Cost inequalities hold up to this absolute slack.
pub const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub phase: Option<usize>,
    pub lhs: f64,
    pub bound: f64,
    /// `lhs ≥ bound` when true, `lhs ≤ bound` otherwise.
    pub at_least: bool,
    pub passed: bool,
    /// Reported but not counted towards the verdict.
    pub informational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub informational: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateStat {
    pub element: usize,
    pub x: f64,
    pub frequency: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundingStats {
    pub samples: usize,
    pub fractional_mass: f64,
    /// Integral mass makes every coordinate unbiased; otherwise the final
    /// lone round-up can only raise inclusion frequencies.
    pub two_sided: bool,
    pub coordinates: Vec<CoordinateStat>,
    pub f_x: f64,
    pub mean_value: f64,
    pub std_error: f64,
    pub certificate_passed: bool,
    pub max_rounded_up_cost: f64,
    pub opt1_cost: f64,
    pub max_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub name: Option<String>,
    pub n: usize,
    pub epsilon: f64,
    pub t: usize,
    pub r: usize,
    pub phases: usize,
    pub m: f64,
    pub opt_set: Vec<usize>,
    pub opt_value: f64,
    pub opt1: Vec<usize>,
    pub opt2: Vec<usize>,
    pub dropped: Vec<usize>,
    pub fractional_value: f64,
    pub best_rounded_value: f64,
    pub queries: u64,
    pub flagged_phases: Vec<usize>,
    pub empty_candidate_skips: usize,
    pub checks: Vec<Check>,
    pub summary: BTreeMap<String, Tally>,
    pub rounding: Option<RoundingStats>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<AnalysisRun>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && !c.informational)
    }
}

struct Checks {
    list: Vec<Check>,
}

impl Checks {
    fn at_least(
        &mut self,
        name: &str,
        phase: Option<usize>,
        lhs: f64,
        bound: f64,
        tol: f64,
    ) -> &mut Check {
        self.push(name, phase, lhs, bound, true, lhs >= bound - tol)
    }

    fn at_most(
        &mut self,
        name: &str,
        phase: Option<usize>,
        lhs: f64,
        bound: f64,
        tol: f64,
    ) -> &mut Check {
        self.push(name, phase, lhs, bound, false, lhs <= bound + tol)
    }

    fn push(
        &mut self,
        name: &str,
        phase: Option<usize>,
        lhs: f64,
        bound: f64,
        at_least: bool,
        passed: bool,
    ) -> &mut Check {
        self.list.push(Check {
            name: name.to_string(),
            phase,
            lhs,
            bound,
            at_least,
            passed,
            informational: false,
            note: None,
        });
        self.list.last_mut().expect("just pushed")
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Runs the algorithm with the guesses of the analysis and evaluates every
/// inequality of the analysis on the result, plus `samples` roundings.
pub fn verify(
    f: &dyn SetFunction,
    costs: &[f64],
    params: &KnapsackParams,
    samples: usize,
) -> Result<VerifyReport> {
    if costs.len() > VERIFY_MAX_ELEMENTS {
        return Err(Error::TooLarge {
            what: "verification",
            n: costs.len(),
            limit: VERIFY_MAX_ELEMENTS,
        });
    }
    let mut params = params.clone();
    params.mode = Mode::AnalysisGuided;
    params.shadow = true;
    let n = costs.len();
    let eps = params.epsilon;
    let run = analysis_run(f, costs, &params)?;
    let grid_defaults = params.grid(1.0)?;
    let mut report = VerifyReport {
        name: None,
        n,
        epsilon: eps,
        t: grid_defaults.t,
        r: grid_defaults.r,
        phases: grid_defaults.phases,
        m: 0.0,
        opt_set: Vec::new(),
        opt_value: 0.0,
        opt1: Vec::new(),
        opt2: Vec::new(),
        dropped: Vec::new(),
        fractional_value: 0.0,
        best_rounded_value: 0.0,
        queries: 0,
        flagged_phases: Vec::new(),
        empty_candidate_skips: 0,
        checks: Vec::new(),
        summary: BTreeMap::new(),
        rounding: None,
        passed: true,
        run: None,
    };
    let Some(run) = run else {
        return Ok(report);
    };

    let eval = Multilinear::new(f).with_k_max(params.k_max);
    let part = &run.partition;
    let opt = part.opt_value;
    let m = run.m;
    let vtol = VALUE_TOLERANCE * opt.abs().max(f64::MIN_POSITIVE);
    let mut checks = Checks { list: Vec::new() };

    report.m = m;
    report.opt_set = part.opt_set.clone();
    report.opt_value = opt;
    report.opt1 = part.opt1.clone();
    report.opt2 = part.opt2.clone();
    report.dropped = part.dropped.clone();
    report.fractional_value = run.outcome.value;
    report.queries = run.outcome.queries;

    // the grid value used for M lies in [(1-ε) f(OPT), f(OPT)]
    checks.at_least("m_lower", None, m, (1.0 - eps) * opt, vtol);
    checks.at_most("m_upper", None, m, opt, vtol);

    // elements outside the first t gain at most f(OPT₁)/t on top of them
    for &(o, gain) in &part.tail_marginals {
        checks
            .at_most(
                "tail_marginal",
                None,
                gain,
                part.opt1_value / run.grid.t as f64,
                vtol,
            )
            .note = Some(format!("element {o}"));
    }

    let opt1_point = &part.opt1;
    let coeff = eps * (1.0 - 12.0 * eps);
    for (phase, analysis) in run.outcome.phases.iter().zip(&run.trace.phases) {
        let p = phase.phase;
        report.empty_candidate_skips += phase.opt1.iter().filter(|r| r.empty).count()
            + phase.opt2.iter().filter(|r| r.empty).count();

        // fractional stage gain
        let joined = eval.eval_join(&phase.after_opt1, opt1_point)?;
        let check = checks.at_least(
            "opt1_step_value",
            Some(p),
            phase.f_after_opt1 - phase.f_start,
            eps * (joined - phase.f_after_opt1) - eps * eps * m,
            vtol,
        );
        if phase.repeated_selection {
            check.informational = true;
            check.note = Some("an element was raised again in this phase".into());
            report.flagged_phases.push(p);
        }

        // fractional-stage picks are dominated by their matched OPT₁ elements
        let mut picked_costs = Vec::new();
        let mut matched_costs = Vec::new();
        for (rec, step) in phase.opt1.iter().zip(&analysis.opt1_steps) {
            if let (Some(a), Some(o)) = (rec.picked, step.matched) {
                picked_costs.push(costs[a]);
                matched_costs.push(costs[o]);
                checks
                    .at_most(
                        "opt1_step_cost",
                        Some(p),
                        costs[a],
                        costs[o],
                        COST_TOLERANCE,
                    )
                    .note = Some(format!(
                    "iteration {}: picked {a}, matched {o}",
                    rec.iteration
                ));
            }
        }
        let worst = sorted(picked_costs)
            .into_iter()
            .zip(sorted(matched_costs))
            .map(|(a, o)| a - o)
            .fold(0.0f64, f64::max);
        checks.at_most("opt1_sorted_costs", Some(p), worst, 0.0, COST_TOLERANCE);

        // large-value picks are dominated by their matched OPT₂ elements
        for (rec, step) in phase.opt2.iter().zip(&analysis.opt2_steps) {
            if let Some(b) = rec.picked {
                match step.matched {
                    Some(o) => {
                        checks
                            .at_most("opt2_step_cost", Some(p), costs[b], costs[o], COST_TOLERANCE)
                            .note = Some(format!(
                            "iteration {}: picked {b}, matched {o}",
                            rec.iteration
                        ));
                    }
                    None => {
                        let c =
                            checks.push("opt2_step_cost", Some(p), costs[b], f64::NAN, false, false);
                        c.note = Some(format!(
                            "iteration {}: picked {b} with nothing to match",
                            rec.iteration
                        ));
                    }
                }
            }
        }

        // integral selections of the phase fit the phase budget
        let spent = cost_of(costs, &phase.b) + cost_of(costs, &phase.c);
        checks.at_most(
            "phase_budget",
            Some(p),
            spent,
            eps * (1.0 - part.opt1_cost),
            COST_TOLERANCE,
        );

        // per-phase progress
        checks.at_least(
            "phase_recursion",
            Some(p),
            phase.f_end - phase.f_start,
            coeff * (opt - phase.f_end) - 2.0 * eps * eps * m,
            vtol,
        );

        if let Some(greedy) = &phase.greedy {
            for d in &greedy.discarded {
                checks
                    .at_most(
                        "discard_gain",
                        Some(p),
                        d.last_gain,
                        (eps / n as f64).powi(2) * opt,
                        vtol,
                    )
                    .note = Some(format!("element {}", d.element));
            }
            for s in &greedy.shadow {
                checks
                    .at_least(
                        "greedy_density",
                        Some(p),
                        s.fresh_density,
                        (1.0 - eps) * s.best_density,
                        1e-12 * s.best_density.abs(),
                    )
                    .note = Some(format!("element {}", s.element));
            }
        }
    }

    let support = run.outcome.max_support();
    checks.at_most(
        "fractional_support",
        None,
        support as f64,
        (run.grid.t * run.grid.phases).min(n) as f64,
        0.0,
    );

    let base = 1.0 + coeff;
    if base > 0.0 {
        let phases = run.grid.phases as f64;
        let bound = (1.0 - base.powf(-phases)) * opt - 2.0 * eps * eps * phases * m;
        let c = checks.at_least("closed_bound", None, run.outcome.value, bound, vtol);
        c.informational = true;
    }

    let mut ref_costs: Vec<f64> = part.opt1.iter().map(|&o| costs[o]).collect();
    ref_costs.sort_by(|a, b| b.total_cmp(a));
    let certificate = check_grouping_invariant(&run.outcome.x, costs, &ref_costs);
    let cert = checks.at_most(
        "grouping_certificate",
        None,
        if certificate.passed() { 0.0 } else { 1.0 },
        0.0,
        0.0,
    );
    if let Some(failure) = &certificate.failure {
        cert.note = Some(format!("{failure:?}"));
    }
    checks.at_most(
        "groups_per_element",
        None,
        certificate.max_groups_per_element() as f64,
        2.0,
        0.0,
    );

    // roundings
    let mut rounding_stats = None;
    let mut best_rounded: f64 = 0.0;
    for trial in &run.trials {
        checks.at_most("feasible", None, trial.solution.cost, 1.0, BUDGET_TOLERANCE);
        best_rounded = best_rounded.max(trial.solution.value);
    }
    if samples > 0 {
        let stats = rounding_statistics(
            f,
            costs,
            &run.outcome.x,
            samples,
            params.seed,
            &ref_costs,
            certificate.passed(),
        )?;
        for c in &stats.coordinates {
            let name = if stats.two_sided {
                "inclusion_frequency"
            } else {
                "inclusion_frequency_lower"
            };
            if stats.two_sided {
                checks
                    .at_most(name, None, (c.frequency - c.x).abs(), c.allowed, 0.0)
                    .note = Some(format!("element {}", c.element));
            } else {
                checks
                    .at_least(name, None, c.frequency, c.x - c.allowed, 0.0)
                    .note = Some(format!("element {}", c.element));
            }
        }
        checks.at_least(
            "rounded_mean_value",
            None,
            stats.mean_value,
            stats.f_x - 4.0 * stats.std_error,
            vtol,
        );
        if stats.certificate_passed {
            checks.at_most(
                "rounded_up_cost",
                None,
                stats.max_rounded_up_cost,
                stats.opt1_cost,
                COST_TOLERANCE,
            );
        }
        checks.at_most("feasible", None, stats.max_cost, 1.0, BUDGET_TOLERANCE);
        rounding_stats = Some(stats);
    }

    report.best_rounded_value = best_rounded;
    report.rounding = rounding_stats;
    for c in &checks.list {
        let tally = report.summary.entry(c.name.clone()).or_default();
        if c.informational {
            tally.informational += 1;
        } else if c.passed {
            tally.passed += 1;
        } else {
            tally.failed += 1;
        }
    }
    report.passed = checks.list.iter().all(|c| c.passed || c.informational);
    report.checks = checks.list;
    report.run = Some(run);
    Ok(report)
}

/// Rounds `x` `samples` times and collects inclusion frequencies, the mean
/// value, and the cost of the coordinates rounded up.
pub fn rounding_statistics(
    f: &dyn SetFunction,
    costs: &[f64],
    x: &SparseFractionalPoint,
    samples: usize,
    seed: u64,
    reference_costs: &[f64],
    certificate_passed: bool,
) -> Result<RoundingStats> {
    let eval = Multilinear::new(f);
    let f_x = eval.eval_exact(x)?;
    let frac: Vec<(usize, f64)> = x.fractional().iter().map(|(&e, &v)| (e, v)).collect();
    let mass = x.fractional_mass();
    let two_sided = (mass - mass.round()).abs() < 1e-9;
    let mut hits = vec![0usize; frac.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    let mut max_up: f64 = 0.0;
    let mut max_cost: f64 = 0.0;
    for k in 1..=samples {
        let transcript = rounding::round_seeded(x, costs, rng.next_u64())?;
        for (h, &(e, _)) in hits.iter_mut().zip(&frac) {
            if transcript.result.contains(&e) {
                *h += 1;
            }
        }
        max_up = max_up.max(cost_of(costs, &transcript.rounded_up));
        let set: Vec<usize> = transcript.result.iter().copied().collect();
        max_cost = max_cost.max(cost_of(costs, &set));
        let v = f.value(&set);
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let var = if samples > 1 {
        m2 / (samples - 1) as f64
    } else {
        0.0
    };
    let coordinates = frac
        .iter()
        .zip(&hits)
        .map(|(&(e, xe), &h)| CoordinateStat {
            element: e,
            x: xe,
            frequency: h as f64 / samples as f64,
            allowed: 4.0 * (xe * (1.0 - xe) / samples as f64).sqrt(),
        })
        .collect();
    Ok(RoundingStats {
        samples,
        fractional_mass: mass,
        two_sided,
        coordinates,
        f_x,
        mean_value: mean,
        std_error: (var / samples as f64).sqrt(),
        certificate_passed,
        max_rounded_up_cost: max_up,
        opt1_cost: reference_costs.iter().sum(),
        max_cost,
    })
}
