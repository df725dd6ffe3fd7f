use serde::Serialize;

use super::{GridValue, GuessGrid, Guesser, OptPartition};
use crate::error::{Error, Result};
use crate::multilinear::{Multilinear, SparseFractionalPoint};
use crate::oracle::SetFunction;

/// One iteration of the fractional stage as seen by the analysis.
#[derive(Debug, Clone, Serialize)]
pub struct Opt1Step {
    pub iteration: usize,
    /// Unmatched OPT₁ element of largest marginal gain.
    pub tilde: Option<usize>,
    pub tilde_marginal: f64,
    pub threshold: Option<GridValue>,
    /// The true marginal exceeded the top of the grid.
    pub capped: bool,
    pub picked: Option<usize>,
    pub matched: Option<usize>,
}

/// One iteration of the large-value stage as seen by the analysis.
#[derive(Debug, Clone, Serialize)]
pub struct Opt2Step {
    pub iteration: usize,
    /// Density bar `(1 − 5ε)(F(z ∨ 1_OPT₂) − F(z)) / c(OPT₂)`.
    pub density_bar: f64,
    pub high_density: Vec<usize>,
    pub tilde: Option<usize>,
    pub tilde_marginal: f64,
    pub threshold: GridValue,
    pub capped: bool,
    pub picked: Option<usize>,
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseAnalysis {
    pub phase: usize,
    pub opt1_steps: Vec<Opt1Step>,
    /// `F(z ∨ 1_OPT₂) − F(z)` at the start of the large-value stage.
    pub opt2_gap: f64,
    pub big_w: Option<GridValue>,
    pub big_w_capped: bool,
    pub opt2_steps: Vec<Opt2Step>,
}

impl PhaseAnalysis {
    /// Matched elements of the fractional stage, in iteration order.
    pub fn opt1_matched(&self) -> Vec<usize> {
        self.opt1_steps.iter().filter_map(|s| s.matched).collect()
    }

    pub fn opt2_matched(&self) -> Vec<usize> {
        self.opt2_steps.iter().filter_map(|s| s.matched).collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalysisTrace {
    pub phases: Vec<PhaseAnalysis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Start,
    Opt1 { next: usize, awaiting: bool },
    Opt2 { next: usize, awaiting: bool },
}

/// Supplies the guesses constructed in the analysis from a known optimum.
///
/// Marginals are computed through an uncounted evaluator so that the
/// algorithm's own query count is unaffected.
pub struct AnalysisGuesser<'a> {
    eval: Multilinear<'a>,
    costs: &'a [f64],
    partition: OptPartition,
    grid: GuessGrid,
    stage: Stage,
    phase: usize,
    pending: Option<usize>,
    pending_set: Vec<usize>,
    trace: AnalysisTrace,
}

impl<'a> AnalysisGuesser<'a> {
    pub fn new(
        f: &'a dyn SetFunction,
        costs: &'a [f64],
        partition: OptPartition,
        grid: GuessGrid,
        k_max: usize,
    ) -> Self {
        AnalysisGuesser {
            eval: Multilinear::new(f).with_k_max(k_max),
            costs,
            partition,
            grid,
            stage: Stage::Start,
            phase: 0,
            pending: None,
            pending_set: Vec::new(),
            trace: AnalysisTrace::default(),
        }
    }

    pub fn partition(&self) -> &OptPartition {
        &self.partition
    }

    pub fn grid(&self) -> &GuessGrid {
        &self.grid
    }

    pub fn trace(&self) -> &AnalysisTrace {
        &self.trace
    }

    pub fn into_trace(self) -> AnalysisTrace {
        self.trace
    }

    fn order_error(&self, call: &str, phase: usize, iteration: usize) -> Error {
        Error::Protocol(format!(
            "{call}({phase}, {iteration}) out of order (phase {}, stage {:?})",
            self.phase, self.stage
        ))
    }

    fn current(&mut self) -> &mut PhaseAnalysis {
        self.trace.phases.last_mut().expect("a phase is open")
    }

    /// Floor of `value / step` on the grid `0..=max`, and whether it hit the cap.
    fn bracket(value: f64, step: f64, max: u64) -> (u64, bool) {
        if step <= 0.0 || value <= 0.0 {
            return (0, false);
        }
        let raw = (value / step).floor();
        if raw >= max as f64 {
            (max, raw > max as f64)
        } else {
            (raw as u64, false)
        }
    }

    /// Unmatched candidate of largest marginal gain, lowest id on ties.
    fn argmax(
        &self,
        x: &SparseFractionalPoint,
        candidates: &[usize],
    ) -> Result<Option<(usize, f64)>> {
        let gains = self.eval.marginals(x, candidates)?;
        let mut best: Option<(usize, f64)> = None;
        for (&e, &g) in candidates.iter().zip(&gains) {
            let better = match best {
                None => true,
                Some((b, bg)) => g > bg || (g == bg && e < b),
            };
            if better {
                best = Some((e, g));
            }
        }
        Ok(best)
    }
}

impl Guesser for AnalysisGuesser<'_> {
    fn opt1_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        y: &SparseFractionalPoint,
    ) -> Result<Option<GridValue>> {
        let new_phase = iteration == 1
            && phase == self.phase + 1
            && matches!(self.stage, Stage::Start | Stage::Opt2 { .. });
        let continuing = phase == self.phase
            && self.stage
                == Stage::Opt1 {
                    next: iteration,
                    awaiting: false,
                };
        if !new_phase && !continuing {
            return Err(self.order_error("opt1_threshold", phase, iteration));
        }
        if new_phase {
            self.phase = phase;
            self.trace.phases.push(PhaseAnalysis {
                phase,
                opt1_steps: Vec::new(),
                opt2_gap: 0.0,
                big_w: None,
                big_w_capped: false,
                opt2_steps: Vec::new(),
            });
        }
        self.stage = Stage::Opt1 {
            next: iteration,
            awaiting: true,
        };

        let matched = self.current().opt1_matched();
        let remaining: Vec<usize> = self
            .partition
            .opt1
            .iter()
            .copied()
            .filter(|o| !matched.contains(o))
            .collect();
        let best = self.argmax(y, &remaining)?;
        let mut step = Opt1Step {
            iteration,
            tilde: best.map(|(e, _)| e),
            tilde_marginal: best.map_or(0.0, |(_, g)| g),
            threshold: None,
            capped: false,
            picked: None,
            matched: None,
        };
        // An exhausted OPT₁, or a best remaining element already fully
        // selected, leaves nothing for this iteration to add.
        let threshold = match best {
            Some((e, g)) if y.coordinate(e) < 1.0 => {
                let (mult, capped) =
                    Self::bracket(g, self.grid.v_step(), self.grid.v_max_multiplier());
                step.capped = capped;
                Some(self.grid.v(mult))
            }
            _ => None,
        };
        step.threshold = threshold;
        self.pending = step.tilde;
        self.current().opt1_steps.push(step);
        Ok(threshold)
    }

    fn opt1_selected(
        &mut self,
        phase: usize,
        iteration: usize,
        picked: Option<usize>,
    ) -> Result<()> {
        let expected = Stage::Opt1 {
            next: iteration,
            awaiting: true,
        };
        if phase != self.phase || self.stage != expected {
            return Err(self.order_error("opt1_selected", phase, iteration));
        }
        let matched_so_far = self.current().opt1_matched();
        let in_opt1 = |e: usize| self.partition.opt1.contains(&e) && !matched_so_far.contains(&e);
        let matched = match picked {
            Some(a) if in_opt1(a) => Some(a),
            _ => self.pending,
        };
        let step = self.current().opt1_steps.last_mut().expect("step recorded");
        step.picked = picked;
        step.matched = matched;
        self.stage = Stage::Opt1 {
            next: iteration + 1,
            awaiting: false,
        };
        Ok(())
    }

    fn opt2_total(&mut self, phase: usize, z0: &SparseFractionalPoint) -> Result<GridValue> {
        if phase != self.phase
            || !matches!(
                self.stage,
                Stage::Opt1 {
                    awaiting: false,
                    ..
                }
            )
        {
            return Err(self.order_error("opt2_total", phase, 0));
        }
        let (gap, big_w, capped) = if self.partition.opt2.is_empty() {
            (0.0, self.grid.big_w(0), false)
        } else {
            let gap = self.eval.eval_join(z0, &self.partition.opt2)? - self.eval.eval_exact(z0)?;
            let (mult, capped) = Self::bracket(
                gap,
                self.grid.big_w_step(),
                self.grid.big_w_max_multiplier(),
            );
            (gap, self.grid.big_w(mult), capped)
        };
        let current = self.current();
        current.opt2_gap = gap;
        current.big_w = Some(big_w);
        current.big_w_capped = capped;
        self.stage = Stage::Opt2 {
            next: 1,
            awaiting: false,
        };
        Ok(big_w)
    }

    fn opt2_threshold(
        &mut self,
        phase: usize,
        iteration: usize,
        z: &SparseFractionalPoint,
    ) -> Result<GridValue> {
        let expected = Stage::Opt2 {
            next: iteration,
            awaiting: false,
        };
        if phase != self.phase || self.stage != expected {
            return Err(self.order_error("opt2_threshold", phase, iteration));
        }
        let big_w = self.current().big_w.expect("set by opt2_total");
        let matched = self.current().opt2_matched();
        let remaining: Vec<usize> = self
            .partition
            .opt2
            .iter()
            .copied()
            .filter(|o| !matched.contains(o))
            .collect();

        let mut high_density = Vec::new();
        let mut density_bar = 0.0;
        if !self.partition.opt2.is_empty() {
            let eps = self.grid.epsilon;
            let base = self.eval.eval_exact(z)?;
            let gap = self.eval.eval_join(z, &self.partition.opt2)? - base;
            density_bar = (1.0 - 5.0 * eps) * gap / self.partition.opt2_cost;
            let gains = self.eval.marginals(z, &remaining)?;
            for (&o, &g) in remaining.iter().zip(&gains) {
                if g / self.costs[o] >= density_bar {
                    high_density.push(o);
                }
            }
        }
        let best = self.argmax(z, &high_density)?;
        let (mult, capped) = match best {
            Some((_, g)) => Self::bracket(
                g,
                self.grid.w_step(big_w.value()),
                self.grid.w_max_multiplier(),
            ),
            None => (0, false),
        };
        let threshold = self.grid.w(&big_w, mult);
        self.pending = best.map(|(e, _)| e);
        self.pending_set = high_density.clone();
        self.current().opt2_steps.push(Opt2Step {
            iteration,
            density_bar,
            high_density,
            tilde: best.map(|(e, _)| e),
            tilde_marginal: best.map_or(0.0, |(_, g)| g),
            threshold,
            capped,
            picked: None,
            matched: None,
        });
        self.stage = Stage::Opt2 {
            next: iteration,
            awaiting: true,
        };
        Ok(threshold)
    }

    fn opt2_selected(
        &mut self,
        phase: usize,
        iteration: usize,
        picked: Option<usize>,
    ) -> Result<()> {
        let expected = Stage::Opt2 {
            next: iteration,
            awaiting: true,
        };
        if phase != self.phase || self.stage != expected {
            return Err(self.order_error("opt2_selected", phase, iteration));
        }
        let matched = match picked {
            Some(b) if self.pending_set.contains(&b) => Some(b),
            _ => self.pending,
        };
        let step = self.current().opt2_steps.last_mut().expect("step recorded");
        step.picked = picked;
        step.matched = matched;
        self.stage = Stage::Opt2 {
            next: iteration + 1,
            awaiting: false,
        };
        Ok(())
    }
}
