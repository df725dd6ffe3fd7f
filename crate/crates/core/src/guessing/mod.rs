//! Guessed values driving one run of the phase engine.
//!
//! A run is parameterized by thresholds `v[p][i]` for the fractional stage,
//! a per-phase value estimate `W[p]`, and thresholds `w[p][i]` for the
//! large-value stage. All values live on grids and are stored as integer
//! multipliers of their grid step so that grid membership is exact.

mod analysis;
mod partition;

pub use analysis::{AnalysisGuesser, AnalysisTrace, Opt1Step, Opt2Step, PhaseAnalysis};
pub use partition::{greedy_order_opt, partition_opt, OptPartition};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::multilinear::SparseFractionalPoint;

const GRID_SLACK: f64 = 1e-9;

/// `⌈x⌉`, ignoring floating-point noise just above an integer.
pub fn ceil_tol(x: f64) -> usize {
    (x - GRID_SLACK).ceil().max(0.0) as usize
}

/// `⌊x⌋`, ignoring floating-point noise just below an integer.
pub fn floor_tol(x: f64) -> u64 {
    (x + GRID_SLACK).floor().max(0.0) as u64
}

/// A grid point `multiplier · step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridValue {
    pub multiplier: u64,
    pub step: f64,
}

impl GridValue {
    pub fn zero() -> Self {
        GridValue {
            multiplier: 0,
            step: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.multiplier as f64 * self.step
    }

    pub fn is_zero(&self) -> bool {
        self.multiplier == 0 || self.step == 0.0
    }
}

/// Enumeration strides: only every `k`-th multiplier is visited. All ones
/// gives the full grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Strides {
    pub v: u64,
    pub big_w: u64,
    pub w: u64,
}

impl Default for Strides {
    fn default() -> Self {
        Strides {
            v: 1,
            big_w: 1,
            w: 1,
        }
    }
}

/// Grid parameters: `t` fractional iterations and up to `r` large-value
/// iterations in each of `phases` phases, for the value estimate `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuessGrid {
    pub epsilon: f64,
    pub t: usize,
    pub r: usize,
    pub phases: usize,
    pub m: f64,
    pub strides: Strides,
}

impl GuessGrid {
    /// Grid with `t = ⌈1/ε³⌉`, `r = ⌈1/ε⌉`, `phases = ⌈1/ε⌉`.
    pub fn new(epsilon: f64, m: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("M must be positive, got {m}")));
        }
        let inv = 1.0 / epsilon;
        Ok(GuessGrid {
            epsilon,
            t: ceil_tol(inv * inv * inv).max(1),
            r: ceil_tol(inv).max(1),
            phases: ceil_tol(inv).max(1),
            m,
            strides: Strides::default(),
        })
    }

    pub fn with_t(mut self, t: usize) -> Self {
        self.t = t.max(1);
        self
    }

    pub fn with_r(mut self, r: usize) -> Self {
        self.r = r.max(1);
        self
    }

    pub fn with_phases(mut self, phases: usize) -> Self {
        self.phases = phases.max(1);
        self
    }

    pub fn with_strides(mut self, strides: Strides) -> Self {
        self.strides = Strides {
            v: strides.v.max(1),
            big_w: strides.big_w.max(1),
            w: strides.w.max(1),
        };
        self
    }

    pub fn v_step(&self) -> f64 {
        self.epsilon * self.m / self.t as f64
    }

    pub fn big_w_step(&self) -> f64 {
        self.epsilon * self.m
    }

    pub fn w_step(&self, big_w: f64) -> f64 {
        self.epsilon * self.epsilon * big_w / self.r as f64
    }

    pub fn v_max_multiplier(&self) -> u64 {
        floor_tol(self.t as f64 / self.epsilon)
    }

    pub fn big_w_max_multiplier(&self) -> u64 {
        floor_tol(1.0 / self.epsilon)
    }

    pub fn w_max_multiplier(&self) -> u64 {
        floor_tol(self.r as f64 / (self.epsilon * self.epsilon))
    }

    pub fn v(&self, multiplier: u64) -> GridValue {
        GridValue {
            multiplier,
            step: self.v_step(),
        }
    }

    pub fn big_w(&self, multiplier: u64) -> GridValue {
        GridValue {
            multiplier,
            step: self.big_w_step(),
        }
    }

    pub fn w(&self, big_w: &GridValue, multiplier: u64) -> GridValue {
        GridValue {
            multiplier,
            step: self.w_step(big_w.value()),
        }
    }

    fn choices(max: u64, stride: u64) -> u64 {
        max / stride + 1
    }

    /// Number of sequences [`enumerate`](Self::enumerate) yields, or `None`
    /// if it overflows a u128. A zero `W[p]` leaves a single all-zero `w[p]`.
    pub fn sequence_count(&self) -> Option<u128> {
        let nv = Self::choices(self.v_max_multiplier(), self.strides.v) as u128;
        let nbw = Self::choices(self.big_w_max_multiplier(), self.strides.big_w) as u128;
        let nw = Self::choices(self.w_max_multiplier(), self.strides.w) as u128;
        let pow = |base: u128, exp: usize| -> Option<u128> {
            (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base))
        };
        let per_phase = pow(nv, self.t)?.checked_mul(
            (nbw - 1)
                .checked_mul(pow(nw, self.r + 1)?)?
                .checked_add(1)?,
        )?;
        pow(per_phase, self.phases)
    }

    /// Iterates over every grid sequence in lexicographic order, refusing when
    /// there would be more than `limit` of them.
    pub fn enumerate(&self, limit: u128) -> Result<GuessIter> {
        let count = self.sequence_count();
        match count {
            Some(c) if c <= limit => Ok(GuessIter::new(self.clone())),
            _ => Err(Error::EnumerationLimit { count, limit }),
        }
    }
}

/// One full set of guesses, stored as grid multipliers (1-based phases and
/// iterations map to index `- 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuessSequence {
    pub v: Vec<Vec<u64>>,
    pub big_w: Vec<u64>,
    pub w: Vec<Vec<u64>>,
}

impl GuessSequence {
    pub fn zeros(grid: &GuessGrid) -> Self {
        GuessSequence {
            v: vec![vec![0; grid.t]; grid.phases],
            big_w: vec![0; grid.phases],
            w: vec![vec![0; grid.r + 1]; grid.phases],
        }
    }
}

/// Odometer over the digits `[v_1..v_t, W, w_1..w_{r+1}]` of each phase.
pub struct GuessIter {
    grid: GuessGrid,
    digits: Vec<u64>,
    done: bool,
}

impl GuessIter {
    fn new(grid: GuessGrid) -> Self {
        let len = grid.phases * (grid.t + 1 + grid.r + 1);
        GuessIter {
            grid,
            digits: vec![0; len],
            done: false,
        }
    }

    fn per_phase(&self) -> usize {
        self.grid.t + 1 + self.grid.r + 1
    }

    fn radix(&self, d: usize) -> u64 {
        let g = &self.grid;
        let offset = d % self.per_phase();
        if offset < g.t {
            GuessGrid::choices(g.v_max_multiplier(), g.strides.v)
        } else if offset == g.t {
            GuessGrid::choices(g.big_w_max_multiplier(), g.strides.big_w)
        } else if self.digits[d - offset + g.t] == 0 {
            1
        } else {
            GuessGrid::choices(g.w_max_multiplier(), g.strides.w)
        }
    }

    fn current(&self) -> GuessSequence {
        let g = &self.grid;
        let mut seq = GuessSequence::zeros(g);
        for p in 0..g.phases {
            let base = p * self.per_phase();
            for i in 0..g.t {
                seq.v[p][i] = self.digits[base + i] * g.strides.v;
            }
            seq.big_w[p] = self.digits[base + g.t] * g.strides.big_w;
            for i in 0..=g.r {
                seq.w[p][i] = self.digits[base + g.t + 1 + i] * g.strides.w;
            }
        }
        seq
    }
}

impl Iterator for GuessIter {
    type Item = GuessSequence;

    fn next(&mut self) -> Option<GuessSequence> {
        if self.done {
            return None;
        }
        let seq = self.current();
        let mut d = self.digits.len();
        loop {
            if d == 0 {
                self.done = true;
                break;
            }
            d -= 1;
            if self.digits[d] + 1 < self.radix(d) {
                self.digits[d] += 1;
                for later in &mut self.digits[d + 1..] {
                    *later = 0;
                }
                break;
            }
        }
        Some(seq)
    }
}

/// Supplies guessed values to the phase engine, in protocol order:
/// per phase, `t` pairs of `opt1_threshold`/`opt1_selected`, then
/// `opt2_total`, then `opt2_threshold` calls each optionally followed by
/// `opt2_selected`. Phases and iterations are 1-based.
pub trait Guesser {
    /// `None` skips the iteration.
    fn opt1_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        y: &SparseFractionalPoint,
    ) -> Result<Option<GridValue>>;

    fn opt1_selected(
        &mut self,
        phase: usize,
        iteration: usize,
        picked: Option<usize>,
    ) -> Result<()>;

    fn opt2_total(&mut self, phase: usize, z0: &SparseFractionalPoint) -> Result<GridValue>;

    /// Threshold `w[phase][iteration]`, `iteration ∈ 1..=r+1`.
    fn opt2_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        z: &SparseFractionalPoint,
    ) -> Result<GridValue>;

    fn opt2_selected(
        &mut self,
        phase: usize,
        iteration: usize,
        picked: Option<usize>,
    ) -> Result<()>;
}

/// Replays a precomputed [`GuessSequence`].
pub struct FixedGuesser {
    grid: GuessGrid,
    seq: GuessSequence,
}

impl FixedGuesser {
    pub fn new(grid: GuessGrid, seq: GuessSequence) -> Self {
        FixedGuesser { grid, seq }
    }

    fn index(&self, phase: usize, iteration: usize, len: usize) -> Result<(usize, usize)> {
        if phase == 0 || phase > self.grid.phases || iteration == 0 || iteration > len {
            return Err(Error::Protocol(format!(
                "no guess for phase {phase}, iteration {iteration}"
            )));
        }
        Ok((phase - 1, iteration - 1))
    }
}

impl Guesser for FixedGuesser {
    fn opt1_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        _y: &SparseFractionalPoint,
    ) -> Result<Option<GridValue>> {
        let (p, i) = self.index(phase, iteration, self.grid.t)?;
        Ok(Some(self.grid.v(self.seq.v[p][i])))
    }

    fn opt1_selected(&mut self, _: usize, _: usize, _: Option<usize>) -> Result<()> {
        Ok(())
    }

    fn opt2_total(&mut self, phase: usize, _z0: &SparseFractionalPoint) -> Result<GridValue> {
        let (p, _) = self.index(phase, 1, 1)?;
        Ok(self.grid.big_w(self.seq.big_w[p]))
    }

    fn opt2_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        _z: &SparseFractionalPoint,
    ) -> Result<GridValue> {
        let (p, i) = self.index(phase, iteration, self.grid.r + 1)?;
        let big_w = self.grid.big_w(self.seq.big_w[p]);
        Ok(self.grid.w(&big_w, self.seq.w[p][i]))
    }

    fn opt2_selected(&mut self, _: usize, _: usize, _: Option<usize>) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn defaults_follow_epsilon() {
        let g = GuessGrid::new(1.0 / 3.0, 1.0).unwrap();
        assert_eq!((g.t, g.r, g.phases), (27, 3, 3));
        let g = GuessGrid::new(0.5, 2.0).unwrap();
        assert_eq!((g.t, g.r, g.phases), (8, 2, 2));
        assert_eq!(g.v_step(), 0.125);
        assert_eq!(g.v_max_multiplier(), 16);
        assert!(GuessGrid::new(1.0, 1.0).is_err());
        assert!(GuessGrid::new(0.5, 0.0).is_err());
    }

    #[test]
    fn tiny_grid_count_matches_iterator() {
        // v ∈ {0, 1/2, 1}; W ∈ {0, 1/2, 1}; w has r/ε² + 1 = 5 choices for each
        // of the r + 1 = 2 entries when W > 0
        let g = GuessGrid::new(0.5, 1.0)
            .unwrap()
            .with_t(1)
            .with_r(1)
            .with_phases(1);
        let expected = 3 * (1 + 2 * 5 * 5);
        assert_eq!(g.sequence_count(), Some(expected as u128));
        let all: Vec<_> = g.enumerate(1000).unwrap().collect();
        assert_eq!(all.len(), expected);
        let distinct: HashSet<_> = all.iter().map(|s| format!("{s:?}")).collect();
        assert_eq!(distinct.len(), expected);
        // lexicographic: first all zeros, last all maxed
        assert_eq!(all[0], GuessSequence::zeros(&g));
        assert_eq!(all.last().unwrap().v[0][0], 2);
        assert_eq!(all.last().unwrap().w[0], vec![4, 4]);
        // a zero W forces all-zero w
        assert!(all
            .iter()
            .all(|s| s.big_w[0] != 0 || s.w[0].iter().all(|&m| m == 0)));
    }

    #[test]
    fn two_phase_count_matches_iterator() {
        let g = GuessGrid::new(0.5, 1.0)
            .unwrap()
            .with_t(2)
            .with_r(1)
            .with_phases(2)
            .with_strides(Strides {
                v: 2,
                big_w: 1,
                w: 4,
            });
        // nv = 4/2 + 1 = 3, nW = 3, nw = 4/4 + 1 = 2
        let per_phase = 3u128.pow(2) * (1 + 2 * 2u128.pow(2));
        assert_eq!(g.sequence_count(), Some(per_phase * per_phase));
        assert_eq!(
            g.enumerate(u128::MAX).unwrap().count() as u128,
            per_phase * per_phase
        );
    }

    #[test]
    fn limit_zero_reports_the_count() {
        let g = GuessGrid::new(0.5, 1.0)
            .unwrap()
            .with_t(1)
            .with_r(1)
            .with_phases(1);
        match g.enumerate(0) {
            Err(Error::EnumerationLimit { count, limit }) => {
                assert_eq!(count, Some(153));
                assert_eq!(limit, 0);
            }
            _ => panic!("expected enumeration refusal"),
        }
        let huge = GuessGrid::new(0.1, 1.0).unwrap();
        assert!(matches!(
            huge.enumerate(u128::MAX),
            Err(Error::EnumerationLimit { count: None, .. })
        ));
    }

    #[test]
    fn single_value_grids_yield_one_sequence() {
        let g = GuessGrid::new(0.5, 1.0)
            .unwrap()
            .with_t(1)
            .with_r(1)
            .with_phases(1)
            .with_strides(Strides {
                v: 10,
                big_w: 10,
                w: 10,
            });
        assert_eq!(g.sequence_count(), Some(1));
        assert_eq!(g.enumerate(1).unwrap().count(), 1);
    }

    #[test]
    fn fixed_guesser_replays_values() {
        let g = GuessGrid::new(0.5, 1.0)
            .unwrap()
            .with_t(1)
            .with_r(1)
            .with_phases(1);
        let mut seq = GuessSequence::zeros(&g);
        seq.v[0][0] = 1;
        seq.big_w[0] = 2;
        seq.w[0][1] = 3;
        let mut guesser = FixedGuesser::new(g, seq);
        let x = SparseFractionalPoint::zero();
        assert_eq!(
            guesser.opt1_threshold(1, 1, &x).unwrap().unwrap().value(),
            0.5
        );
        assert_eq!(guesser.opt2_total(1, &x).unwrap().value(), 1.0);
        assert_eq!(
            guesser.opt2_threshold(1, 2, &x).unwrap().value(),
            3.0 * 0.25
        );
        assert!(guesser.opt2_threshold(1, 3, &x).is_err());
        assert!(guesser.opt1_threshold(2, 1, &x).is_err());
    }
}
