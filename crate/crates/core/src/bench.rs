//! Timed algorithm runs, CSV rows, and the query-scaling experiment.

use std::fmt;
use std::fs::OpenOptions;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, brute_force_opt, cost_of};
use crate::error::{Error, Result};
use crate::generate::{generate, Family, GenConfig};
use crate::guessing::FixedGuesser;
use crate::guessing::GuessSequence;
use crate::knapsack::{self, knapsack_guess, KnapsackParams};
use crate::lazy_greedy::{self, LazyGreedyConfig};
use crate::multilinear::SparseFractionalPoint;
use crate::oracle::{CountingOracle, Instance};

pub const CSV_HEADER: [&str; 9] = [
    "instance",
    "algorithm",
    "n",
    "epsilon",
    "value",
    "cost",
    "queries",
    "millis",
    "ratio_opt",
];

/// Instances up to this size get an exact optimum for the `ratio_opt` column.
pub const RATIO_MAX_ELEMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knapsack,
    Density,
    Sviridenko,
    Brute,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Knapsack,
        Algorithm::Density,
        Algorithm::Sviridenko,
        Algorithm::Brute,
    ];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Knapsack => "knapsack",
            Algorithm::Density => "density",
            Algorithm::Sviridenko => "sviridenko",
            Algorithm::Brute => "brute",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown algorithm {s:?} (expected knapsack, density, sviridenko or brute)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub instance: String,
    pub algorithm: String,
    pub n: usize,
    pub epsilon: f64,
    pub value: f64,
    pub cost: f64,
    pub queries: u64,
    pub millis: f64,
    pub ratio_opt: Option<f64>,
}

/// A finished run: its CSV row and the chosen set in the file's element ids.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub row: RunRow,
    pub set: Vec<usize>,
}

pub fn optimum_if_small(instance: &Instance) -> Result<Option<f64>> {
    if instance.len() > RATIO_MAX_ELEMENTS {
        return Ok(None);
    }
    Ok(Some(brute_force_opt(instance, instance.costs())?.1))
}

pub fn run_algorithm(
    instance: &Instance,
    algorithm: Algorithm,
    params: &KnapsackParams,
    opt: Option<f64>,
) -> Result<RunOutcome> {
    let costs = instance.costs();
    let oracle = CountingOracle::new(instance);
    let start = Instant::now();
    let (set, value, queries) = match algorithm {
        Algorithm::Knapsack => {
            let report = knapsack::knapsack(instance, costs, params)?;
            (report.best.set, report.best.value, report.queries)
        }
        Algorithm::Density => {
            let res = baselines::density_greedy_baseline(&oracle, costs, params.epsilon)?;
            (res.set, res.value, res.queries)
        }
        Algorithm::Sviridenko => {
            let res = baselines::sviridenko(&oracle, costs)?;
            (res.set, res.value, res.queries)
        }
        Algorithm::Brute => {
            let (set, value) = brute_force_opt(&oracle, costs)?;
            (set, value, oracle.query_count())
        }
    };
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let cost = cost_of(costs, &set);
    if cost > 1.0 + baselines::BUDGET_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "{algorithm} returned {set:?} with cost {cost}"
        )));
    }
    let ratio_opt = opt.map(|o| if o > 0.0 { value / o } else { 1.0 });
    let ids = instance.original_ids();
    Ok(RunOutcome {
        row: RunRow {
            instance: instance.name().unwrap_or("unnamed").to_string(),
            algorithm: algorithm.to_string(),
            n: instance.len(),
            epsilon: params.epsilon,
            value,
            cost,
            queries,
            millis: (millis * 1e3).round() / 1e3,
            ratio_opt,
        },
        set: set.iter().map(|&e| ids[e]).collect(),
    })
}

/// Writes `rows` as CSV, appending to an existing file without repeating the
/// header.
pub fn write_rows(path: &Path, rows: &[RunRow], append: bool) -> Result<()> {
    let exists = append && path.exists() && path.metadata()?.len() > 0;
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)?;
    write_rows_to(file, rows, !exists)
}

pub fn write_rows_to<W: std::io::Write>(out: W, rows: &[RunRow], header: bool) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    if header {
        writer.write_record(CSV_HEADER)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub algorithm: String,
    pub queries: u64,
    /// `queries / (n · ln(n/ε))`.
    pub normalized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Max over min of the normalized lazy-greedy query counts.
    pub greedy_spread: f64,
    pub phase_spread: f64,
}

fn spread(rows: &[ScalingRow], algorithm: &str) -> f64 {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| r.normalized)
        .collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        1.0
    } else {
        max / min
    }
}

/// Sparse instance for scaling: about eight universe items per element.
pub fn scaling_instance(family: Family, n: usize, seed: u64) -> Result<Instance> {
    let mut cfg = GenConfig::new(family, n, seed);
    let universe = n.max(16);
    cfg.universe = Some(universe);
    cfg.density = (8.0 / universe as f64).min(1.0);
    Instance::from_file(generate(&cfg)?)
}

/// Counts the queries of budgeted lazy greedy from the empty set and of one
/// phase of the engine, for each `n`.
pub fn scaling(family: Family, ns: &[usize], epsilon: f64, seed: u64) -> Result<ScalingReport> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "n values must be strictly increasing".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let instance = scaling_instance(family, n, seed)?;
        let costs = instance.costs();
        let n = instance.len();
        let norm = n as f64 * (n as f64 / epsilon).ln();

        let oracle = CountingOracle::new(&instance);
        let all: Vec<usize> = (0..n).collect();
        let cfg = LazyGreedyConfig::new(epsilon, n, f64::INFINITY).with_budget(1.0);
        lazy_greedy::run(&oracle, &SparseFractionalPoint::zero(), costs, &all, &cfg)?;
        let q = oracle.query_count();
        rows.push(ScalingRow {
            n,
            algorithm: "lazy_greedy".into(),
            queries: q,
            normalized: q as f64 / norm,
        });

        let estimate = knapsack::estimate_m(&oracle, costs, epsilon)?;
        if let Some(&m) = estimate.grid.first() {
            let mut params = KnapsackParams::new(epsilon, knapsack::Mode::Enumerate);
            params.t = Some(1);
            params.r = Some(1);
            params.phases = Some(1);
            let grid = params.grid(m)?;
            let mut seq = GuessSequence::zeros(&grid);
            seq.v[0][0] = grid.v_max_multiplier() / 2;
            seq.big_w[0] = grid.big_w_max_multiplier();
            let mut guesser = FixedGuesser::new(grid.clone(), seq);
            oracle.reset_count();
            knapsack_guess(&oracle, costs, &mut guesser, &params.engine(&grid))?;
            let q = oracle.query_count();
            rows.push(ScalingRow {
                n,
                algorithm: "knapsack_phase".into(),
                queries: q,
                normalized: q as f64 / norm,
            });
        }
    }
    Ok(ScalingReport {
        greedy_spread: spread(&rows, "lazy_greedy"),
        phase_spread: spread(&rows, "knapsack_phase"),
        rows,
    })
}
