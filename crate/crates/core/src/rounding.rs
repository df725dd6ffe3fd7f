//! Pairwise swap rounding of the fractional coordinates.
//!
//! Fractional coordinates are sorted by cost; the two most expensive ones
//! repeatedly exchange mass in a mean-preserving random step until one of
//! them becomes integral. A final lone fractional coordinate is rounded up.
//!
//! The module also builds the grouping certificate that bounds the cost of
//! the coordinates rounded up to 1: sorted by nonincreasing cost, unit
//! intervals of fractional mass form groups, and group `i` must only contain
//! elements no more expensive than the `i`-th most expensive reference item.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multilinear::{SparseFractionalPoint, SNAP_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingCase {
    /// The pair sums to at most 1: all mass moves onto one element.
    Merge,
    /// The pair sums to more than 1: one element is rounded up.
    Split,
    /// Only one fractional coordinate is left: rounded up.
    Lone,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundingStep {
    /// Higher-cost element of the pair (the lone element for `Lone`).
    pub high: usize,
    /// Lower-cost element of the pair.
    pub low: Option<usize>,
    pub case: RoundingCase,
    /// Probability that the higher-cost element keeps the mass.
    pub probability: f64,
    pub draw: f64,
    /// Remaining fractional coordinates after the step, by increasing cost.
    pub state: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundingTranscript {
    pub seed: u64,
    pub steps: Vec<RoundingStep>,
    pub rounded_up: Vec<usize>,
    pub result: BTreeSet<usize>,
}

fn snap(v: f64) -> f64 {
    if v <= SNAP_TOLERANCE {
        0.0
    } else if v >= 1.0 - SNAP_TOLERANCE {
        1.0
    } else {
        v
    }
}

/// Rounds `x` to an integral set using a generator seeded with `seed`.
pub fn round_seeded(
    x: &SparseFractionalPoint,
    costs: &[f64],
    seed: u64,
) -> Result<RoundingTranscript> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transcript = round(x, costs, &mut rng)?;
    transcript.seed = seed;
    Ok(transcript)
}

/// Rounds `x`; the integral part of `x` is passed through untouched.
///
/// The returned transcript has `seed = 0`; use [`round_seeded`] for
/// replayable transcripts.
pub fn round<R: Rng + ?Sized>(
    x: &SparseFractionalPoint,
    costs: &[f64],
    rng: &mut R,
) -> Result<RoundingTranscript> {
    let mut list: Vec<(usize, f64)> = Vec::with_capacity(x.support_size());
    for (&e, &v) in x.fractional() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidInput(format!(
                "fractional coordinate of element {e} is {v}"
            )));
        }
        if e >= costs.len() {
            return Err(Error::InvalidInput(format!("element {e} has no cost")));
        }
        list.push((e, v));
    }
    // ascending cost; the most expensive element sits at the end
    list.sort_by(|a, b| costs[a.0].total_cmp(&costs[b.0]).then(a.0.cmp(&b.0)));

    let mut steps = Vec::new();
    let mut rounded_up = Vec::new();
    while let Some(&(high, x_high)) = list.last() {
        if list.len() == 1 {
            list.pop();
            rounded_up.push(high);
            steps.push(RoundingStep {
                high,
                low: None,
                case: RoundingCase::Lone,
                probability: 1.0,
                draw: 0.0,
                state: Vec::new(),
            });
            break;
        }
        let k = list.len();
        let (low, x_low) = list[k - 2];
        let mut sum = x_high + x_low;
        if (sum - 1.0).abs() <= SNAP_TOLERANCE {
            sum = 1.0;
        }
        let draw: f64 = rng.gen();
        let (case, probability);
        if sum > 1.0 {
            case = RoundingCase::Split;
            probability = (1.0 - x_low) / (2.0 - x_high - x_low);
            // both updates use the pre-step values
            let residual = snap(sum - 1.0);
            list.pop();
            if draw < probability {
                rounded_up.push(high);
                list[k - 2] = (low, residual);
            } else {
                rounded_up.push(low);
                list[k - 2] = (high, residual);
            }
        } else {
            case = RoundingCase::Merge;
            probability = x_high / sum;
            list.pop();
            list[k - 2] = if draw < probability {
                (high, sum)
            } else {
                (low, sum)
            };
        }
        // drop whatever became integral
        let (survivor, value) = list[k - 2];
        if value >= 1.0 {
            list.pop();
            rounded_up.push(survivor);
        } else if value <= 0.0 {
            list.pop();
        }
        steps.push(RoundingStep {
            high,
            low: Some(low),
            case,
            probability,
            draw,
            state: list.clone(),
        });
    }

    let mut result = x.integral().clone();
    result.extend(rounded_up.iter().copied());
    Ok(RoundingTranscript {
        seed: 0,
        steps,
        rounded_up,
        result,
    })
}

/// One unit-mass group of the certificate.
#[derive(Debug, Clone, Serialize)]
pub struct Group {
    /// 1-based group index, matched with the `index`-th most expensive
    /// reference item.
    pub index: usize,
    pub members: Vec<usize>,
    pub reference_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateFailure {
    /// Total fractional mass exceeds the number of reference items.
    Mass { total: f64, available: usize },
    /// `element` of group `group` costs more than the group's reference item.
    Domination {
        element: usize,
        group: usize,
        element_cost: f64,
        reference_cost: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupingCertificate {
    /// Fractional elements by nonincreasing cost with their intervals
    /// `[start, end)` of the mass line.
    pub intervals: Vec<(usize, f64, f64)>,
    pub groups: Vec<Group>,
    pub failure: Option<CertificateFailure>,
}

impl GroupingCertificate {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    /// Every element overlaps at most two groups.
    pub fn max_groups_per_element(&self) -> usize {
        self.intervals
            .iter()
            .map(|&(e, _, _)| {
                self.groups
                    .iter()
                    .filter(|g| g.members.contains(&e))
                    .count()
            })
            .max()
            .unwrap_or(0)
    }
}

/// Builds the grouping of the fractional coordinates of `x` and checks it
/// against `reference_costs`, the costs of the reference items sorted by
/// nonincreasing cost.
pub fn check_grouping_invariant(
    x: &SparseFractionalPoint,
    costs: &[f64],
    reference_costs: &[f64],
) -> GroupingCertificate {
    let mut elements: Vec<(usize, f64)> = x.fractional().iter().map(|(&e, &v)| (e, v)).collect();
    elements.sort_by(|a, b| costs[b.0].total_cmp(&costs[a.0]).then(a.0.cmp(&b.0)));

    let mut intervals = Vec::with_capacity(elements.len());
    let mut start = 0.0;
    for &(e, v) in &elements {
        intervals.push((e, start, start + v));
        start += v;
    }
    let total = start;
    let group_count = (total - SNAP_TOLERANCE).ceil().max(0.0) as usize;

    let mut groups: Vec<Group> = (1..=group_count)
        .map(|index| Group {
            index,
            members: Vec::new(),
            reference_cost: reference_costs.get(index - 1).copied(),
        })
        .collect();
    for &(e, a, b) in &intervals {
        for g in groups.iter_mut() {
            let (lo, hi) = ((g.index - 1) as f64, g.index as f64);
            if a < hi - SNAP_TOLERANCE && b > lo + SNAP_TOLERANCE {
                g.members.push(e);
            }
        }
    }

    let mut failure = None;
    if total > reference_costs.len() as f64 + 1e-9 {
        failure = Some(CertificateFailure::Mass {
            total,
            available: reference_costs.len(),
        });
    } else {
        'outer: for g in &groups {
            let reference = g.reference_cost.unwrap_or(f64::NEG_INFINITY);
            for &e in &g.members {
                if costs[e] > reference + 1e-12 {
                    failure = Some(CertificateFailure::Domination {
                        element: e,
                        group: g.index,
                        element_cost: costs[e],
                        reference_cost: reference,
                    });
                    break 'outer;
                }
            }
        }
    }
    GroupingCertificate {
        intervals,
        groups,
        failure,
    }
}
