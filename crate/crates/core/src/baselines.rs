//! Reference algorithms: exhaustive optimum, density greedy with the best
//! singleton, and partial enumeration over seeds of up to three elements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lazy_greedy::{self, LazyGreedyConfig};
use crate::multilinear::SparseFractionalPoint;
use crate::oracle::{CountingOracle, SetFunction};

pub const BRUTE_FORCE_MAX_ELEMENTS: usize = 24;
pub const SVIRIDENKO_MAX_ELEMENTS: usize = 120;
/// Slack on the unit budget when deciding feasibility.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub algorithm: String,
    pub set: Vec<usize>,
    pub value: f64,
    pub cost: f64,
    pub queries: u64,
}

impl BaselineResult {
    pub fn is_feasible(&self) -> bool {
        self.cost <= 1.0 + BUDGET_TOLERANCE
    }
}

pub fn cost_of(costs: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&e| costs[e]).sum()
}

struct Search<'a> {
    f: &'a dyn SetFunction,
    costs: &'a [f64],
    current: Vec<usize>,
    best: Vec<usize>,
    best_value: f64,
}

impl Search<'_> {
    fn tie_tol(&self) -> f64 {
        1e-12 * self.best_value.abs().max(1.0)
    }

    fn offer(&mut self, value: f64) {
        let tol = self.tie_tol();
        let better = value > self.best_value + tol;
        let tied = value >= self.best_value - tol && self.current < self.best;
        if better || tied {
            self.best_value = value;
            self.best = self.current.clone();
        }
    }

    fn dfs(&mut self, i: usize, spent: f64) {
        let n = self.costs.len();
        if i == n {
            return;
        }
        let residual = 1.0 + BUDGET_TOLERANCE - spent;
        let mut hull = self.current.clone();
        hull.extend((i..n).filter(|&e| self.costs[e] <= residual));
        if hull.len() == self.current.len() {
            return;
        }
        if self.f.value(&hull) < self.best_value - self.tie_tol() {
            return;
        }
        if self.costs[i] <= residual {
            self.current.push(i);
            let value = self.f.value(&self.current);
            self.offer(value);
            self.dfs(i + 1, spent + self.costs[i]);
            self.current.pop();
        }
        self.dfs(i + 1, spent);
    }
}

/// Exact optimum by depth-first search with cost pruning and the bound
/// `f(current ∪ every remaining element that still fits)`. Among optimal sets
/// the lexicographically smallest is returned.
pub fn brute_force_opt(f: &dyn SetFunction, costs: &[f64]) -> Result<(Vec<usize>, f64)> {
    let n = costs.len();
    if n > BRUTE_FORCE_MAX_ELEMENTS {
        return Err(Error::TooLarge {
            what: "brute force",
            n,
            limit: BRUTE_FORCE_MAX_ELEMENTS,
        });
    }
    let mut search = Search {
        f,
        costs,
        current: Vec::new(),
        best: Vec::new(),
        best_value: f.value(&[]),
    };
    search.dfs(0, 0.0);
    Ok((search.best, search.best_value))
}

/// Best feasible singleton, lowest id on ties.
pub fn best_singleton(oracle: &CountingOracle<'_>, costs: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (e, &c) in costs.iter().enumerate() {
        if c > 1.0 + BUDGET_TOLERANCE {
            continue;
        }
        let v = oracle.value(&[e]);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((e, v));
        }
    }
    best
}

/// Lazy density greedy from the empty set under the unit budget, compared
/// with the best feasible singleton.
pub fn density_greedy_baseline(
    oracle: &CountingOracle<'_>,
    costs: &[f64],
    epsilon: f64,
) -> Result<BaselineResult> {
    let start = oracle.query_count();
    let n = costs.len();
    let all: Vec<usize> = (0..n).collect();
    let cfg = LazyGreedyConfig::new(epsilon, n, f64::INFINITY).with_budget(1.0);
    let greedy = lazy_greedy::run(oracle, &SparseFractionalPoint::zero(), costs, &all, &cfg)?;
    let mut set = greedy.selected.clone();
    set.sort_unstable();
    let mut value = greedy.gain_achieved + oracle.inner().value(&[]);
    if let Some((e, v)) = best_singleton(oracle, costs) {
        if v > value {
            set = vec![e];
            value = v;
        }
    }
    Ok(BaselineResult {
        algorithm: "density".into(),
        cost: cost_of(costs, &set),
        set,
        value,
        queries: oracle.query_count() - start,
    })
}

/// Plain density greedy from `seed`, skipping elements that do not fit.
fn complete_greedily(
    oracle: &CountingOracle<'_>,
    costs: &[f64],
    seed: &[usize],
) -> (Vec<usize>, f64) {
    let mut set = seed.to_vec();
    let mut spent = cost_of(costs, &set);
    let mut value = oracle.value(&set);
    let mut open: Vec<usize> = (0..costs.len()).filter(|e| !seed.contains(e)).collect();
    loop {
        open.retain(|&e| spent + costs[e] <= 1.0 + BUDGET_TOLERANCE);
        let mut best: Option<(usize, f64, f64)> = None;
        for &e in &open {
            set.push(e);
            let v = oracle.value(&set);
            set.pop();
            let density = (v - value) / costs[e];
            if best.is_none_or(|(_, d, _)| density > d) {
                best = Some((e, density, v));
            }
        }
        match best {
            Some((e, density, v)) if density > 0.0 => {
                set.push(e);
                spent += costs[e];
                value = v;
                open.retain(|&o| o != e);
            }
            _ => break,
        }
    }
    set.sort_unstable();
    (set, value)
}

/// Every feasible seed of at most three elements, completed by density
/// greedy; the best completion wins.
pub fn sviridenko(oracle: &CountingOracle<'_>, costs: &[f64]) -> Result<BaselineResult> {
    let n = costs.len();
    if n > SVIRIDENKO_MAX_ELEMENTS {
        return Err(Error::TooLarge {
            what: "partial enumeration",
            n,
            limit: SVIRIDENKO_MAX_ELEMENTS,
        });
    }
    let start = oracle.query_count();
    let fits = |set: &[usize]| cost_of(costs, set) <= 1.0 + BUDGET_TOLERANCE;
    let mut seeds: Vec<Vec<usize>> = vec![Vec::new()];
    for a in 0..n {
        seeds.push(vec![a]);
        for b in a + 1..n {
            seeds.push(vec![a, b]);
            for c in b + 1..n {
                seeds.push(vec![a, b, c]);
            }
        }
    }
    let mut best_set = Vec::new();
    let mut best_value = f64::NEG_INFINITY;
    for seed in seeds.iter().filter(|s| fits(s)) {
        let (set, value) = if seed.len() < 3 {
            let v = oracle.value(seed);
            (seed.clone(), v)
        } else {
            complete_greedily(oracle, costs, seed)
        };
        if value > best_value {
            best_value = value;
            best_set = set;
        }
    }
    Ok(BaselineResult {
        algorithm: "sviridenko".into(),
        cost: cost_of(costs, &best_set),
        set: best_set,
        value: best_value,
        queries: oracle.query_count() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Objective;

    fn modular(values: &[f64]) -> Objective {
        Objective::Coverage {
            weights: values.to_vec(),
            sets: (0..values.len()).map(|e| vec![e]).collect(),
        }
    }

    fn naive_opt(f: &dyn SetFunction, costs: &[f64]) -> f64 {
        let n = costs.len();
        (0..1usize << n)
            .map(|mask| (0..n).filter(|e| mask >> e & 1 == 1).collect::<Vec<_>>())
            .filter(|s| cost_of(costs, s) <= 1.0 + BUDGET_TOLERANCE)
            .map(|s| f.value(&s))
            .fold(0.0, f64::max)
    }

    #[test]
    fn brute_force_small_modular() {
        let f = modular(&[3.0, 2.0, 1.0]);
        let (set, value) = brute_force_opt(&f, &[0.5, 0.6, 0.4]).unwrap();
        assert_eq!(set, vec![0, 2]);
        assert_eq!(value, 4.0);
    }

    #[test]
    fn brute_force_edges() {
        let f = modular(&[1.0, 1.0, 1.0]);
        assert_eq!(
            brute_force_opt(&f, &[0.2, 0.3, 0.1]).unwrap().0,
            vec![0, 1, 2]
        );
        let empty = modular(&[]);
        assert_eq!(brute_force_opt(&empty, &[]).unwrap(), (vec![], 0.0));
        let big = modular(&[1.0; 25]);
        assert!(brute_force_opt(&big, &[0.1; 25]).unwrap_err().is_capacity());
    }

    #[test]
    fn brute_force_ties_pick_smallest_set() {
        let f = modular(&[1.0, 1.0, 1.0]);
        let (set, value) = brute_force_opt(&f, &[0.6, 0.6, 0.6]).unwrap();
        assert_eq!((set, value), (vec![0], 1.0));
    }

    #[test]
    fn brute_force_matches_naive_on_coverage() {
        let f = Objective::Coverage {
            weights: vec![2.0, 1.0, 3.0, 1.0, 2.0, 1.0],
            sets: vec![
                vec![0, 1],
                vec![1, 2],
                vec![2, 3, 4],
                vec![4, 5],
                vec![0, 5],
                vec![3],
            ],
        };
        let costs = [0.3, 0.25, 0.6, 0.2, 0.35, 0.1];
        assert_eq!(
            brute_force_opt(&f, &costs).unwrap().1,
            naive_opt(&f, &costs)
        );
    }

    #[test]
    fn density_baseline_prefers_heavy_singleton() {
        // item 0 alone is worth 10 at full budget; the cheap items have
        // better density but add up to only 4
        let f = modular(&[10.0, 1.0, 1.0, 1.0, 1.0]);
        let costs = [1.0, 0.05, 0.05, 0.05, 0.05];
        let oracle = CountingOracle::new(&f);
        let res = density_greedy_baseline(&oracle, &costs, 0.1).unwrap();
        assert_eq!(res.set, vec![0]);
        assert_eq!(res.value, 10.0);
        assert!(res.is_feasible());
    }

    #[test]
    fn density_baseline_takes_the_cheap_items() {
        let f = modular(&[3.0, 1.0, 1.0, 1.0, 1.0]);
        let costs = [1.0, 0.05, 0.05, 0.05, 0.05];
        let oracle = CountingOracle::new(&f);
        let res = density_greedy_baseline(&oracle, &costs, 0.1).unwrap();
        assert_eq!(res.set, vec![1, 2, 3, 4]);
        assert_eq!(res.value, 4.0);
    }

    #[test]
    fn sviridenko_is_exact_on_tiny_instances() {
        let f = modular(&[3.0, 2.0, 1.0]);
        let costs = [0.5, 0.6, 0.4];
        let oracle = CountingOracle::new(&f);
        let res = sviridenko(&oracle, &costs).unwrap();
        assert_eq!(res.value, 4.0);
        assert!(res.is_feasible());
    }
}
