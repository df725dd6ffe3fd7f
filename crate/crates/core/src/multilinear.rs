//! Exact and sampled evaluation of the multilinear extension
//! `F(x) = E[f(R(x))]`, where `R(x)` contains each element `e` independently
//! with probability `x_e`.
//!
//! The algorithm keeps only a handful of coordinates strictly fractional, so
//! `F` is computed exactly by expanding over the subsets of the fractional
//! support: `2^k` oracle queries for `k` fractional coordinates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::SetFunction;

/// Coordinates within this distance of 0 or 1 are snapped.
pub const SNAP_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_K_MAX: usize = 20;

/// A point of `[0,1]^V` stored as an integral set plus a small map of strictly
/// fractional coordinates; every other coordinate is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr")]
pub struct SparseFractionalPoint {
    integral: BTreeSet<usize>,
    fractional: BTreeMap<usize, f64>,
}

#[derive(Deserialize)]
struct PointRepr {
    integral: BTreeSet<usize>,
    fractional: BTreeMap<usize, f64>,
}

impl TryFrom<PointRepr> for SparseFractionalPoint {
    type Error = Error;

    fn try_from(repr: PointRepr) -> Result<Self> {
        SparseFractionalPoint::from_parts(repr.integral, repr.fractional)
    }
}

impl SparseFractionalPoint {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The indicator vector `1_S`.
    pub fn from_set(set: impl IntoIterator<Item = usize>) -> Self {
        SparseFractionalPoint {
            integral: set.into_iter().collect(),
            fractional: BTreeMap::new(),
        }
    }

    pub fn from_parts(integral: BTreeSet<usize>, fractional: BTreeMap<usize, f64>) -> Result<Self> {
        for (&e, &v) in &fractional {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "fractional coordinate of element {e} is {v}, expected a value in (0, 1)"
                )));
            }
            if integral.contains(&e) {
                return Err(Error::InvalidInput(format!(
                    "element {e} is both integral and fractional"
                )));
            }
        }
        Ok(SparseFractionalPoint {
            integral,
            fractional,
        })
    }

    pub fn integral(&self) -> &BTreeSet<usize> {
        &self.integral
    }

    pub fn fractional(&self) -> &BTreeMap<usize, f64> {
        &self.fractional
    }

    pub fn support_size(&self) -> usize {
        self.fractional.len()
    }

    pub fn is_integral(&self) -> bool {
        self.fractional.is_empty()
    }

    pub fn coordinate(&self, e: usize) -> f64 {
        if self.integral.contains(&e) {
            1.0
        } else {
            self.fractional.get(&e).copied().unwrap_or(0.0)
        }
    }

    /// `‖x‖₁` restricted to the fractional coordinates.
    pub fn fractional_mass(&self) -> f64 {
        self.fractional.values().sum()
    }

    /// Returns `x + δ·1_e`. A result within [`SNAP_TOLERANCE`] of 1 is snapped
    /// to 1 and moved into the integral set.
    pub fn increase_coordinate(&self, e: usize, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "coordinate increase must be nonnegative, got {delta}"
            )));
        }
        let updated = self.coordinate(e) + delta;
        if updated > 1.0 + SNAP_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "coordinate of element {e} would reach {updated} > 1"
            )));
        }
        self.with_coordinate(e, updated)
    }

    /// Returns `x` with coordinate `e` replaced by `value` (snapped).
    pub fn with_coordinate(&self, e: usize, value: f64) -> Result<Self> {
        if !(-SNAP_TOLERANCE..=1.0 + SNAP_TOLERANCE).contains(&value) {
            return Err(Error::InvalidInput(format!(
                "coordinate value {value} outside [0, 1]"
            )));
        }
        let mut next = self.clone();
        next.integral.remove(&e);
        next.fractional.remove(&e);
        if value >= 1.0 - SNAP_TOLERANCE {
            next.integral.insert(e);
        } else if value > SNAP_TOLERANCE {
            next.fractional.insert(e, value);
        }
        Ok(next)
    }

    /// `x ∨ 1_S`.
    pub fn join(&self, set: &[usize]) -> Self {
        let mut next = self.clone();
        for &e in set {
            next.fractional.remove(&e);
            next.integral.insert(e);
        }
        next
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Evaluator for `F` backed by a value oracle.
///
/// Pass a [`crate::oracle::CountingOracle`] to have every subset evaluation
/// counted, or its `inner()` function for uncounted bookkeeping.
pub struct Multilinear<'a> {
    f: &'a dyn SetFunction,
    k_max: usize,
    memo: Option<Mutex<HashMap<Vec<usize>, f64>>>,
}

impl<'a> Multilinear<'a> {
    pub fn new(f: &'a dyn SetFunction) -> Self {
        Multilinear {
            f,
            k_max: DEFAULT_K_MAX,
            memo: None,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    /// Caches subset values across calls so repeated subsets are not
    /// re-queried. Off by default.
    pub fn with_memo(mut self) -> Self {
        self.memo = Some(Mutex::new(HashMap::new()));
        self
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn function(&self) -> &'a dyn SetFunction {
        self.f
    }

    pub fn eval_exact(&self, x: &SparseFractionalPoint) -> Result<f64> {
        self.eval_join(x, &[])
    }

    /// `F(x ∨ 1_extra)` without materializing the joined point.
    pub fn eval_join(&self, x: &SparseFractionalPoint, extra: &[usize]) -> Result<f64> {
        let frac: Vec<(usize, f64)> = x
            .fractional
            .iter()
            .filter(|(e, _)| !extra.contains(e))
            .map(|(&e, &v)| (e, v))
            .collect();
        if frac.len() > self.k_max {
            return Err(Error::Capacity {
                support: frac.len(),
                limit: self.k_max,
            });
        }
        let mut base: Vec<usize> = x.integral.iter().copied().collect();
        for &e in extra {
            if !x.integral.contains(&e) && !base[x.integral.len()..].contains(&e) {
                base.push(e);
            }
        }
        Ok(self.expand(&mut base, &frac, 1.0))
    }

    fn expand(&self, base: &mut Vec<usize>, frac: &[(usize, f64)], prob: f64) -> f64 {
        match frac.split_last() {
            None => prob * self.query(base),
            Some((&(e, xe), rest)) => {
                let without = self.expand(base, rest, prob * (1.0 - xe));
                base.push(e);
                let with = self.expand(base, rest, prob * xe);
                base.pop();
                without + with
            }
        }
    }

    fn query(&self, set: &[usize]) -> f64 {
        match &self.memo {
            None => self.f.value(set),
            Some(memo) => {
                let mut key = set.to_vec();
                key.sort_unstable();
                if let Some(&v) = memo.lock().expect("memo lock").get(&key) {
                    return v;
                }
                let v = self.f.value(set);
                memo.lock().expect("memo lock").insert(key, v);
                v
            }
        }
    }

    /// `F(x ∨ 1_e) − F(x)`; zero without any query when `x_e = 1`.
    pub fn marginal_up(&self, x: &SparseFractionalPoint, e: usize) -> Result<f64> {
        if x.integral.contains(&e) {
            return Ok(0.0);
        }
        Ok(self.eval_join(x, &[e])? - self.eval_exact(x)?)
    }

    /// Marginals of several candidates, sharing the single `F(x)` evaluation.
    pub fn marginals(&self, x: &SparseFractionalPoint, candidates: &[usize]) -> Result<Vec<f64>> {
        let base = self.eval_exact(x)?;
        candidates
            .iter()
            .map(|&e| {
                if x.integral.contains(&e) {
                    Ok(0.0)
                } else {
                    Ok(self.eval_join(x, &[e])? - base)
                }
            })
            .collect()
    }

    /// Unbiased estimate of `F(x)` from `samples` independent draws of `R(x)`.
    pub fn eval_mc(
        &self,
        x: &SparseFractionalPoint,
        samples: usize,
        seed: u64,
    ) -> Result<McEstimate> {
        if samples == 0 {
            return Err(Error::InvalidInput(
                "at least one sample is required".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set: Vec<usize> = Vec::with_capacity(x.integral.len() + x.fractional.len());
        // Welford keeps the mean exact when every sample has the same value.
        let (mut mean, mut m2) = (0.0f64, 0.0f64);
        for k in 1..=samples {
            set.clear();
            set.extend(x.integral.iter().copied());
            for (&e, &p) in &x.fractional {
                if rng.gen::<f64>() < p {
                    set.push(e);
                }
            }
            let v = self.f.value(&set);
            let delta = v - mean;
            mean += delta / k as f64;
            m2 += delta * (v - mean);
        }
        let std_error = if samples > 1 {
            (m2 / (samples - 1) as f64 / samples as f64).sqrt()
        } else {
            0.0
        };
        Ok(McEstimate { mean, std_error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CountingOracle, Objective};

    fn ab_coverage() -> Objective {
        // a -> {1, 2}, b -> {2, 3}
        Objective::Coverage {
            weights: vec![0.0, 1.0, 1.0, 1.0],
            sets: vec![vec![1, 2], vec![2, 3]],
        }
    }

    fn point(frac: &[(usize, f64)]) -> SparseFractionalPoint {
        SparseFractionalPoint::from_parts(BTreeSet::new(), frac.iter().copied().collect()).unwrap()
    }

    #[test]
    fn integral_point_costs_one_query() {
        let f = ab_coverage();
        let oracle = CountingOracle::new(&f);
        let ml = Multilinear::new(&oracle);
        let x = SparseFractionalPoint::from_set([0, 1]);
        assert_eq!(ml.eval_exact(&x).unwrap(), 3.0);
        assert_eq!(oracle.query_count(), 1);
        assert_eq!(ml.eval_exact(&SparseFractionalPoint::zero()).unwrap(), 0.0);
    }

    #[test]
    fn half_half_coverage_expands_to_1_75() {
        let f = ab_coverage();
        let ml = Multilinear::new(&f);
        assert_eq!(ml.eval_exact(&point(&[(0, 0.5), (1, 0.5)])).unwrap(), 1.75);
    }

    #[test]
    fn marginal_up_examples() {
        let f = ab_coverage();
        let ml = Multilinear::new(&f);
        assert_eq!(
            ml.marginal_up(&SparseFractionalPoint::zero(), 1).unwrap(),
            2.0
        );
        let x = point(&[(0, 0.5)]);
        assert_eq!(ml.marginal_up(&x, 1).unwrap(), 1.5);
        let full = SparseFractionalPoint::from_set([1]);
        assert_eq!(ml.marginal_up(&full, 1).unwrap(), 0.0);
        assert_eq!(ml.marginals(&x, &[0, 1]).unwrap(), vec![1.0, 1.5]);
    }

    #[test]
    fn capacity_error_instead_of_sampling() {
        let f = ab_coverage();
        let ml = Multilinear::new(&f).with_k_max(1);
        let err = ml.eval_exact(&point(&[(0, 0.5), (1, 0.5)])).unwrap_err();
        assert!(matches!(
            err,
            Error::Capacity {
                support: 2,
                limit: 1
            }
        ));
        // joining one of the two coordinates brings the support back in range
        assert!(ml.eval_join(&point(&[(0, 0.5), (1, 0.5)]), &[1]).is_ok());
    }

    #[test]
    fn increase_coordinate_snaps_at_one() {
        let x = SparseFractionalPoint::zero();
        let x = x.increase_coordinate(3, 0.5).unwrap();
        assert_eq!(x.fractional().get(&3), Some(&0.5));
        let y = x.increase_coordinate(3, 0.5).unwrap();
        assert!(y.integral().contains(&3) && y.is_integral());
        let z = point(&[(2, 0.25)]).increase_coordinate(2, 0.25).unwrap();
        assert_eq!(z.coordinate(2), 0.5);
        assert_eq!(z.support_size(), 1);
        assert!(x.increase_coordinate(3, 0.75).is_err());
    }

    #[test]
    fn repeated_thirds_terminate_at_one() {
        let mut x = SparseFractionalPoint::zero();
        for _ in 0..3 {
            x = x.increase_coordinate(0, 1.0 / 3.0).unwrap();
        }
        assert!(x.integral().contains(&0));
    }

    #[test]
    fn from_parts_validates() {
        assert!(SparseFractionalPoint::from_parts(BTreeSet::new(), [(0, 1.0)].into()).is_err());
        assert!(SparseFractionalPoint::from_parts([0].into(), [(0, 0.5)].into()).is_err());
        let json = r#"{"integral": [1], "fractional": {"0": 1.5}}"#;
        assert!(serde_json::from_str::<SparseFractionalPoint>(json).is_err());
    }

    #[test]
    fn monte_carlo_is_exact_for_integral_points_and_seeded() {
        let f = ab_coverage();
        let ml = Multilinear::new(&f);
        let est = ml
            .eval_mc(&SparseFractionalPoint::from_set([0]), 50, 7)
            .unwrap();
        assert_eq!(
            est,
            McEstimate {
                mean: 2.0,
                std_error: 0.0
            }
        );
        let x = point(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(
            ml.eval_mc(&x, 1000, 9).unwrap(),
            ml.eval_mc(&x, 1000, 9).unwrap()
        );
        let est = ml.eval_mc(&x, 100_000, 11).unwrap();
        assert!((est.mean - 1.75).abs() <= 4.0 * est.std_error);
        assert!(ml.eval_mc(&x, 0, 1).is_err());
    }

    #[test]
    fn memo_only_reduces_queries() {
        let f = ab_coverage();
        let oracle = CountingOracle::new(&f);
        let ml = Multilinear::new(&oracle).with_memo();
        let x = point(&[(0, 0.5), (1, 0.5)]);
        let v = ml.eval_exact(&x).unwrap();
        assert_eq!(oracle.query_count(), 4);
        assert_eq!(ml.eval_exact(&x).unwrap(), v);
        assert_eq!(oracle.query_count(), 4);
    }
}
