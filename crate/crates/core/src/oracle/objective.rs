//! Set-function abstraction and the built-in monotone submodular families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set function over the ground set `{0, .., ground_size()-1}`.
///
/// `value` receives distinct element ids in arbitrary order and must be a pure
/// function of the set.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;
    fn value(&self, set: &[usize]) -> f64;
}

/// The objective families supported by instance files.
///
/// Every family is monotone and submodular with `f(∅) = 0` as long as its
/// weights are nonnegative, which [`Objective::validate`] enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    /// Weighted coverage: `f(S) = Σ_{u ∈ ∪_{e∈S} sets[e]} weights[u]`.
    Coverage {
        weights: Vec<f64>,
        sets: Vec<Vec<usize>>,
    },
    /// Facility location: `f(S) = Σ_u max_{e∈S} similarity[u][e]`, with
    /// `f(∅) = 0`. Rows are clients, columns are elements.
    #[serde(rename = "facility")]
    FacilityLocation { similarity: Vec<Vec<f64>> },
    /// Concave over modular: `f(S) = Σ_j scales[j] · sqrt(Σ_{e∈S} weights[j][e])`.
    ConcaveModular {
        scales: Vec<f64>,
        weights: Vec<Vec<f64>>,
    },
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidInput(format!(
            "{what} must be finite and nonnegative, got {w}"
        )));
    }
    Ok(())
}

impl Objective {
    pub fn family(&self) -> &'static str {
        match self {
            Objective::Coverage { .. } => "coverage",
            Objective::FacilityLocation { .. } => "facility",
            Objective::ConcaveModular { .. } => "concave_modular",
        }
    }

    /// Number of elements the objective is defined over.
    pub fn len(&self) -> usize {
        match self {
            Objective::Coverage { sets, .. } => sets.len(),
            Objective::FacilityLocation { similarity } => {
                similarity.first().map_or(0, |row| row.len())
            }
            Objective::ConcaveModular { weights, .. } => weights.first().map_or(0, |row| row.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks shape consistency against `n` elements and nonnegativity.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Objective::Coverage { weights, sets } => {
                if sets.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "coverage objective lists {} sets for {n} elements",
                        sets.len()
                    )));
                }
                for &w in weights {
                    check_weight(w, "coverage weight")?;
                }
                for (e, set) in sets.iter().enumerate() {
                    if let Some(&u) = set.iter().find(|&&u| u >= weights.len()) {
                        return Err(Error::InvalidInput(format!(
                            "element {e} covers universe item {u}, universe has {} items",
                            weights.len()
                        )));
                    }
                }
            }
            Objective::FacilityLocation { similarity } => {
                for row in similarity {
                    if row.len() != n {
                        return Err(Error::InvalidInput(format!(
                            "facility similarity row has {} entries for {n} elements",
                            row.len()
                        )));
                    }
                    for &s in row {
                        check_weight(s, "similarity")?;
                    }
                }
            }
            Objective::ConcaveModular { scales, weights } => {
                if scales.len() != weights.len() {
                    return Err(Error::InvalidInput(format!(
                        "{} scales for {} groups",
                        scales.len(),
                        weights.len()
                    )));
                }
                for &a in scales {
                    check_weight(a, "group scale")?;
                }
                for row in weights {
                    if row.len() != n {
                        return Err(Error::InvalidInput(format!(
                            "group weight row has {} entries for {n} elements",
                            row.len()
                        )));
                    }
                    for &w in row {
                        check_weight(w, "group weight")?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Restricts the objective to the listed elements; element `keep[i]` of
    /// the original becomes element `i` of the result.
    pub fn restrict(&self, keep: &[usize]) -> Objective {
        match self {
            Objective::Coverage { weights, sets } => Objective::Coverage {
                weights: weights.clone(),
                sets: keep.iter().map(|&e| sets[e].clone()).collect(),
            },
            Objective::FacilityLocation { similarity } => Objective::FacilityLocation {
                similarity: similarity
                    .iter()
                    .map(|row| keep.iter().map(|&e| row[e]).collect())
                    .collect(),
            },
            Objective::ConcaveModular { scales, weights } => Objective::ConcaveModular {
                scales: scales.clone(),
                weights: weights
                    .iter()
                    .map(|row| keep.iter().map(|&e| row[e]).collect())
                    .collect(),
            },
        }
    }
}

impl SetFunction for Objective {
    fn ground_size(&self) -> usize {
        self.len()
    }

    fn value(&self, set: &[usize]) -> f64 {
        match self {
            Objective::Coverage { weights, sets } => {
                let mut covered = vec![0u64; weights.len().div_ceil(64)];
                let mut total = 0.0;
                for &e in set {
                    for &u in &sets[e] {
                        let (word, bit) = (u / 64, 1u64 << (u % 64));
                        if covered[word] & bit == 0 {
                            covered[word] |= bit;
                            total += weights[u];
                        }
                    }
                }
                total
            }
            Objective::FacilityLocation { similarity } => similarity
                .iter()
                .map(|row| set.iter().map(|&e| row[e]).fold(0.0, f64::max))
                .sum(),
            Objective::ConcaveModular { scales, weights } => scales
                .iter()
                .zip(weights)
                .map(|(a, row)| a * set.iter().map(|&e| row[e]).sum::<f64>().sqrt())
                .sum(),
        }
    }
}

/// A set function given by its full value table, indexed by bitmask.
///
/// Used to inject arbitrary (possibly non-submodular) functions in tests and
/// to cache small objectives so repeated oracle calls become lookups.
#[derive(Debug, Clone)]
pub struct TableFunction {
    n: usize,
    values: Vec<f64>,
}

impl TableFunction {
    pub const MAX_ELEMENTS: usize = 22;

    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > Self::MAX_ELEMENTS {
            return Err(Error::TooLarge {
                what: "table function",
                n,
                limit: Self::MAX_ELEMENTS,
            });
        }
        if values.len() != 1 << n {
            return Err(Error::InvalidInput(format!(
                "table for {n} elements needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        Ok(TableFunction { n, values })
    }

    /// Evaluates `f` on every subset of its ground set.
    pub fn tabulate(f: &dyn SetFunction) -> Result<Self> {
        let n = f.ground_size();
        if n > Self::MAX_ELEMENTS {
            return Err(Error::TooLarge {
                what: "table function",
                n,
                limit: Self::MAX_ELEMENTS,
            });
        }
        let mut set = Vec::with_capacity(n);
        let values = (0..1usize << n)
            .map(|mask| {
                set.clear();
                set.extend((0..n).filter(|&e| mask >> e & 1 == 1));
                f.value(&set)
            })
            .collect();
        Ok(TableFunction { n, values })
    }

    pub fn value_of_mask(&self, mask: usize) -> f64 {
        self.values[mask]
    }
}

impl SetFunction for TableFunction {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn value(&self, set: &[usize]) -> f64 {
        let mask = set.iter().fold(0usize, |m, &e| m | 1 << e);
        self.values[mask]
    }
}

/// First witness found by [`check_monotone_submodular`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `f(∅) ≠ 0`.
    Normalization { value: f64 },
    /// `f(set ∪ {element}) < f(set)`.
    NotMonotone { set: Vec<usize>, element: usize },
    /// `f(smaller ∪ {element}) − f(smaller) < f(larger ∪ {element}) − f(larger)`
    /// with `smaller ⊂ larger`.
    NotSubmodular {
        smaller: Vec<usize>,
        larger: Vec<usize>,
        element: usize,
    },
}

pub const CHECK_MAX_ELEMENTS: usize = 16;

fn mask_to_set(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&e| mask >> e & 1 == 1).collect()
}

/// Exhaustively checks normalization, monotonicity and submodularity.
///
/// Submodularity is checked in its local form
/// `f(S+a) + f(S+b) ≥ f(S+a+b) + f(S)`, which is equivalent to diminishing
/// returns over all `S ⊆ T`. Comparisons allow a relative slack of 1e-9 of the
/// largest table value.
pub fn check_monotone_submodular(f: &dyn SetFunction) -> Result<Option<Violation>> {
    let n = f.ground_size();
    if n > CHECK_MAX_ELEMENTS {
        return Err(Error::TooLarge {
            what: "exhaustive submodularity check",
            n,
            limit: CHECK_MAX_ELEMENTS,
        });
    }
    let table = TableFunction::tabulate(f)?;
    let scale = table.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;

    let empty = table.value_of_mask(0);
    if empty.abs() > tol {
        return Ok(Some(Violation::Normalization { value: empty }));
    }
    for mask in 0..1usize << n {
        let base = table.value_of_mask(mask);
        for a in (0..n).filter(|&a| mask >> a & 1 == 0) {
            let with_a = table.value_of_mask(mask | 1 << a);
            if with_a < base - tol {
                return Ok(Some(Violation::NotMonotone {
                    set: mask_to_set(mask, n),
                    element: a,
                }));
            }
            for b in (a + 1..n).filter(|&b| mask >> b & 1 == 0) {
                let with_b = table.value_of_mask(mask | 1 << b);
                let with_ab = table.value_of_mask(mask | 1 << a | 1 << b);
                if with_a + with_b < with_ab + base - tol {
                    return Ok(Some(Violation::NotSubmodular {
                        smaller: mask_to_set(mask, n),
                        larger: mask_to_set(mask | 1 << b, n),
                        element: a,
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_set_coverage() -> Objective {
        Objective::Coverage {
            weights: vec![1.0; 4],
            sets: vec![vec![1, 2], vec![2, 3]],
        }
    }

    #[test]
    fn coverage_counts_union_once() {
        let f = two_set_coverage();
        assert_eq!(f.value(&[0, 1]), 3.0);
        assert_eq!(f.value(&[1]), 2.0);
        assert_eq!(f.value(&[]), 0.0);
    }

    #[test]
    fn concave_modular_single_group() {
        let f = Objective::ConcaveModular {
            scales: vec![1.0],
            weights: vec![vec![4.0]],
        };
        assert_eq!(f.value(&[0]), 2.0);
        assert_eq!(f.value(&[]), 0.0);
    }

    #[test]
    fn facility_takes_best_per_client() {
        let f = Objective::FacilityLocation {
            similarity: vec![vec![0.5, 0.2], vec![0.1, 0.9]],
        };
        assert_eq!(f.value(&[]), 0.0);
        assert_eq!(f.value(&[0]), 0.6);
        assert_eq!(f.value(&[0, 1]), 1.4);
    }

    #[test]
    fn built_in_families_pass_the_checker() {
        assert_eq!(
            check_monotone_submodular(&two_set_coverage()).unwrap(),
            None
        );
        // singleton groups turn the concave family into a modular function
        let modular = Objective::ConcaveModular {
            scales: vec![3.0, 2.0, 1.0],
            weights: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        };
        assert_eq!(check_monotone_submodular(&modular).unwrap(), None);
    }

    #[test]
    fn supermodular_table_is_rejected_with_witness() {
        // f({a,b}) - f({a}) = 3 > f({b}) - f(∅) = 1
        let f = TableFunction::new(2, vec![0.0, 1.0, 1.0, 4.0]).unwrap();
        let v = check_monotone_submodular(&f).unwrap();
        assert_eq!(
            v,
            Some(Violation::NotSubmodular {
                smaller: vec![],
                larger: vec![1],
                element: 0
            })
        );
    }

    #[test]
    fn non_monotone_and_unnormalized_tables_are_rejected() {
        let f = TableFunction::new(1, vec![0.0, -1.0]).unwrap();
        assert!(matches!(
            check_monotone_submodular(&f).unwrap(),
            Some(Violation::NotMonotone { .. })
        ));
        let g = TableFunction::new(1, vec![2.0, 3.0]).unwrap();
        assert!(matches!(
            check_monotone_submodular(&g).unwrap(),
            Some(Violation::Normalization { .. })
        ));
    }

    #[test]
    fn checker_refuses_large_ground_sets() {
        let f = Objective::Coverage {
            weights: vec![1.0],
            sets: vec![vec![0]; 17],
        };
        assert!(matches!(
            check_monotone_submodular(&f),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn restrict_reindexes_columns() {
        let f = Objective::FacilityLocation {
            similarity: vec![vec![0.1, 0.2, 0.3]],
        };
        let g = f.restrict(&[2, 0]);
        assert_eq!(g.value(&[0]), 0.3);
        assert_eq!(g.value(&[1]), 0.1);
    }

    #[test]
    fn validate_rejects_negative_and_misshapen_input() {
        let bad = Objective::Coverage {
            weights: vec![-1.0],
            sets: vec![vec![0]],
        };
        assert!(bad.validate(1).is_err());
        let out_of_range = Objective::Coverage {
            weights: vec![1.0],
            sets: vec![vec![3]],
        };
        assert!(out_of_range.validate(1).is_err());
        assert!(two_set_coverage().validate(3).is_err());
    }

    #[test]
    fn table_matches_source_function() {
        let f = two_set_coverage();
        let t = TableFunction::tabulate(&f).unwrap();
        for mask in 0..4 {
            let set = mask_to_set(mask, 2);
            assert_eq!(t.value(&set), f.value(&set));
        }
    }
}
