//! The phase engine and the outer driver that feeds it guesses, rounds its
//! fractional output, and keeps the best feasible set.

mod engine;

pub use engine::{
    knapsack_guess, EngineConfig, FractionalOutcome, Opt1Record, Opt2Record, PhaseTrace,
    THRESHOLD_TOLERANCE,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, cost_of, BaselineResult, BUDGET_TOLERANCE};
use crate::error::{Error, Result};
use crate::guessing::{
    ceil_tol, greedy_order_opt, partition_opt, AnalysisGuesser, AnalysisTrace, FixedGuesser,
    GuessGrid, OptPartition, Strides,
};
use crate::multilinear::DEFAULT_K_MAX;
use crate::oracle::{CountingOracle, SetFunction};
use crate::rounding::{self, RoundingTranscript};

/// Ratio `M₀ / f(OPT)` the grid of `M` values is built to cover.
pub const M_GRID_SPAN: f64 = 4.0;
/// The greedy half of the `M` estimate runs with at most this `ε`.
pub const ESTIMATE_EPSILON: f64 = 0.1;

/// Where the guessed values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Every grid sequence.
    Enumerate,
    /// Every grid sequence on a thinned grid.
    Practical { v: u64, big_w: u64, w: u64 },
    /// The values built in the analysis from an exact optimum (small `n`).
    AnalysisGuided,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnapsackParams {
    pub epsilon: f64,
    /// Defaults: `t = ⌈1/ε³⌉`, `r = ⌈1/ε⌉`, `phases = ⌈1/ε⌉`.
    pub t: Option<usize>,
    pub r: Option<usize>,
    pub phases: Option<usize>,
    pub k_max: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Largest number of guess sequences enumerated per `M`.
    pub limit: u128,
    /// Independent roundings of each fractional outcome.
    pub rounding_trials: usize,
    pub shadow: bool,
}

impl KnapsackParams {
    pub fn new(epsilon: f64, mode: Mode) -> Self {
        KnapsackParams {
            epsilon,
            t: None,
            r: None,
            phases: None,
            k_max: DEFAULT_K_MAX,
            mode,
            seed: 0,
            limit: 100_000,
            rounding_trials: 1,
            shadow: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if [self.t, self.r, self.phases].contains(&Some(0)) {
            return Err(Error::InvalidInput(
                "t, r and phases must be positive".into(),
            ));
        }
        if self.rounding_trials == 0 {
            return Err(Error::InvalidInput(
                "at least one rounding trial is required".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self, m: f64) -> Result<GuessGrid> {
        let mut grid = GuessGrid::new(self.epsilon, m)?;
        if let Some(t) = self.t {
            grid = grid.with_t(t);
        }
        if let Some(r) = self.r {
            grid = grid.with_r(r);
        }
        if let Some(p) = self.phases {
            grid = grid.with_phases(p);
        }
        if let Mode::Practical { v, big_w, w } = self.mode {
            grid = grid.with_strides(Strides { v, big_w, w });
        }
        Ok(grid)
    }

    pub fn engine(&self, grid: &GuessGrid) -> EngineConfig {
        EngineConfig {
            epsilon: self.epsilon,
            t: grid.t,
            r: grid.r,
            phases: grid.phases,
            k_max: self.k_max,
            shadow: self.shadow,
        }
    }
}

/// Constant-factor estimate of the optimum and the grid of `M` values.
#[derive(Debug, Clone, Serialize)]
pub struct MEstimate {
    pub m0: f64,
    pub baseline: BaselineResult,
    pub grid: Vec<f64>,
}

/// `M₀` is the better of lazy density greedy and the best singleton; the grid
/// is `M₀(1+ε)^j` for `j = 0..=⌈log_{1+ε} 4⌉`. Empty when nothing has value.
pub fn estimate_m(oracle: &CountingOracle<'_>, costs: &[f64], epsilon: f64) -> Result<MEstimate> {
    let baseline =
        baselines::density_greedy_baseline(oracle, costs, epsilon.min(ESTIMATE_EPSILON))?;
    let m0 = baseline.value;
    let grid = if m0 > 0.0 {
        let steps = ceil_tol(M_GRID_SPAN.ln() / (1.0 + epsilon).ln());
        (0..=steps)
            .map(|j| m0 * (1.0 + epsilon).powi(j as i32))
            .collect()
    } else {
        Vec::new()
    };
    Ok(MEstimate { m0, baseline, grid })
}

/// A rounded set with its value and cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub set: Vec<usize>,
    pub value: f64,
    pub cost: f64,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        self.cost <= 1.0 + BUDGET_TOLERANCE
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundingTrial {
    pub transcript: RoundingTranscript,
    pub solution: Solution,
}

/// Rounds `x` `trials` times with seeds drawn from `rng`.
fn round_outcome(
    f: &dyn SetFunction,
    costs: &[f64],
    outcome: &FractionalOutcome,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RoundingTrial>> {
    (0..trials)
        .map(|_| {
            let transcript = rounding::round_seeded(&outcome.x, costs, rng.next_u64())?;
            let set: Vec<usize> = transcript.result.iter().copied().collect();
            let solution = Solution {
                value: f.value(&set),
                cost: cost_of(costs, &set),
                set,
            };
            Ok(RoundingTrial {
                transcript,
                solution,
            })
        })
        .collect()
}

/// One analysis-guided run together with everything needed to re-check it.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisRun {
    pub partition: OptPartition,
    pub m: f64,
    pub m_estimate: MEstimate,
    pub grid: GuessGrid,
    pub outcome: FractionalOutcome,
    pub trace: AnalysisTrace,
    pub trials: Vec<RoundingTrial>,
}

/// Largest grid value not above `opt_value`, or the smallest one if all lie
/// above it.
fn analysis_m(grid: &[f64], opt_value: f64) -> Option<f64> {
    let slack = 1e-12 * opt_value.abs().max(1.0);
    grid.iter()
        .copied()
        .rfind(|&m| m <= opt_value + slack)
        .or_else(|| grid.first().copied())
}

/// Computes the optimum exhaustively, builds the guesses of the analysis
/// from it, and runs the engine once. `None` when the optimum is worthless.
pub fn analysis_run(
    f: &dyn SetFunction,
    costs: &[f64],
    params: &KnapsackParams,
) -> Result<Option<AnalysisRun>> {
    params.validate()?;
    let oracle = CountingOracle::new(f);
    let (opt_set, opt_value) = baselines::brute_force_opt(f, costs)?;
    let m_estimate = estimate_m(&oracle, costs, params.epsilon)?;
    let m = match analysis_m(&m_estimate.grid, opt_value) {
        Some(m) if opt_value > 0.0 => m,
        _ => return Ok(None),
    };
    let grid = params.grid(m)?;
    let order = greedy_order_opt(f, &opt_set);
    let partition = partition_opt(f, costs, &order, params.epsilon, grid.t);

    oracle.reset_count();
    let mut guesser = AnalysisGuesser::new(f, costs, partition.clone(), grid.clone(), params.k_max);
    let outcome = knapsack_guess(&oracle, costs, &mut guesser, &params.engine(&grid))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let trials = round_outcome(f, costs, &outcome, params.rounding_trials, &mut rng)?;
    Ok(Some(AnalysisRun {
        partition,
        m,
        m_estimate,
        grid,
        outcome,
        trace: guesser.into_trace(),
        trials,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct KnapsackReport {
    /// Best feasible set over all runs and baselines.
    pub best: Solution,
    /// `"knapsack"` when a rounded run won, otherwise the baseline's name.
    pub source: String,
    pub baseline: BaselineResult,
    pub m_grid: Vec<f64>,
    /// Engine runs and how many of their roundings were feasible.
    pub runs: usize,
    pub rounded: usize,
    pub feasible: usize,
    /// Best feasible rounded run alone, if any.
    pub best_run: Option<Solution>,
    pub queries: u64,
    pub analysis: Option<AnalysisRun>,
}

/// Runs the algorithm in the configured mode and returns the best feasible
/// set, never worse than the density-greedy baseline at `ε` or at
/// `min(ε, 0.1)`.
pub fn knapsack(
    f: &dyn SetFunction,
    costs: &[f64],
    params: &KnapsackParams,
) -> Result<KnapsackReport> {
    params.validate()?;
    let oracle = CountingOracle::new(f);
    let estimate = estimate_m(&oracle, costs, params.epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut runs = 0;
    let mut rounded = 0;
    let mut feasible = 0;
    let mut best_run: Option<Solution> = None;
    let mut analysis = None;
    let mut consider = |trials: &[RoundingTrial], best_run: &mut Option<Solution>| {
        for trial in trials {
            rounded += 1;
            if !trial.solution.is_feasible() {
                continue;
            }
            feasible += 1;
            if best_run
                .as_ref()
                .is_none_or(|b| trial.solution.value > b.value)
            {
                *best_run = Some(trial.solution.clone());
            }
        }
    };

    let mut analysis_queries = 0;
    match params.mode {
        Mode::AnalysisGuided => {
            if let Some(run) = analysis_run(f, costs, params)? {
                runs += 1;
                analysis_queries = run.outcome.queries;
                consider(&run.trials, &mut best_run);
                analysis = Some(run);
            }
        }
        Mode::Enumerate | Mode::Practical { .. } => {
            for &m in &estimate.grid {
                let grid = params.grid(m)?;
                let engine = params.engine(&grid);
                for seq in grid.enumerate(params.limit)? {
                    let mut guesser = FixedGuesser::new(grid.clone(), seq);
                    let outcome = knapsack_guess(&oracle, costs, &mut guesser, &engine)?;
                    runs += 1;
                    let trials =
                        round_outcome(f, costs, &outcome, params.rounding_trials, &mut rng)?;
                    consider(&trials, &mut best_run);
                }
            }
        }
    }

    // the estimate's greedy runs at min(ε, 0.1); the one at ε itself can land
    // on a different, better set
    let own = baselines::density_greedy_baseline(&oracle, costs, params.epsilon)?;
    let baseline = if own.value > estimate.baseline.value {
        own
    } else {
        estimate.baseline.clone()
    };
    let baseline_solution = Solution {
        set: baseline.set.clone(),
        value: baseline.value,
        cost: baseline.cost,
    };
    let (best, source) = match &best_run {
        Some(run) if run.value >= baseline.value => (run.clone(), "knapsack".to_string()),
        _ => (baseline_solution, baseline.algorithm.clone()),
    };
    if !best.is_feasible() {
        return Err(Error::Infeasible(format!(
            "best set {:?} costs {} > 1",
            best.set, best.cost
        )));
    }
    Ok(KnapsackReport {
        best,
        source,
        baseline,
        m_grid: estimate.grid,
        runs,
        rounded,
        feasible,
        best_run,
        queries: oracle.query_count() + analysis_queries,
        analysis,
    })
}
