//! Seeded random instances for the three objective families.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{InstanceFile, Objective, SetFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Coverage,
    Facility,
    ConcaveModular,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Coverage, Family::Facility, Family::ConcaveModular];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Coverage => "coverage",
            Family::Facility => "facility",
            Family::ConcaveModular => "concave_modular",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Family::Coverage),
            "facility" => Ok(Family::Facility),
            "concave_modular" | "concave" => Ok(Family::ConcaveModular),
            _ => Err(Error::InvalidInput(format!(
                "unknown family {s:?} (expected coverage, facility or concave_modular)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Costs are drawn from `(0, c_max]`.
    pub c_max: f64,
    /// Probability that an element touches a given universe item, client or
    /// group.
    pub density: f64,
    /// Universe items, clients or groups; defaults depend on the family.
    pub universe: Option<usize>,
    /// Make costs grow with singleton values.
    pub adversarial: bool,
    /// Small integer weights, so sums and products stay exact in floating
    /// point.
    pub integer_weights: bool,
}

impl GenConfig {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        GenConfig {
            family,
            n,
            seed,
            c_max: 0.5,
            density: 0.2,
            universe: None,
            adversarial: false,
            integer_weights: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.c_max > 0.0 && self.c_max <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "c_max must lie in (0, 1], got {}",
                self.c_max
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if self.universe == Some(0) {
            return Err(Error::InvalidInput("universe must be positive".into()));
        }
        Ok(())
    }
}

fn weight(rng: &mut ChaCha8Rng, integer: bool, max: u32) -> f64 {
    if integer {
        rng.gen_range(1..=max) as f64
    } else {
        rng.gen_range(0.5..=max as f64)
    }
}

fn objective(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Objective {
    let n = cfg.n;
    match cfg.family {
        Family::Coverage => {
            let universe = cfg.universe.unwrap_or((2 * n).max(8));
            let weights = (0..universe)
                .map(|_| weight(rng, cfg.integer_weights, 4))
                .collect();
            let sets = (0..n)
                .map(|_| {
                    let mut set: Vec<usize> = (0..universe)
                        .filter(|_| rng.gen_bool(cfg.density))
                        .collect();
                    if set.is_empty() {
                        set.push(rng.gen_range(0..universe));
                    }
                    set
                })
                .collect();
            Objective::Coverage { weights, sets }
        }
        Family::Facility => {
            let clients = cfg.universe.unwrap_or(n.max(4));
            let similarity = (0..clients)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen_bool(cfg.density) {
                                weight(rng, cfg.integer_weights, 8)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            Objective::FacilityLocation { similarity }
        }
        Family::ConcaveModular => {
            let groups = cfg.universe.unwrap_or((n / 2).max(2));
            let scales = (0..groups)
                .map(|_| weight(rng, cfg.integer_weights, 3))
                .collect();
            let weights = (0..groups)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen_bool(cfg.density) {
                                weight(rng, cfg.integer_weights, 4)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            Objective::ConcaveModular { scales, weights }
        }
    }
}

/// Builds an instance file; the same configuration always yields the same
/// file.
pub fn generate(cfg: &GenConfig) -> Result<InstanceFile> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let objective = objective(cfg, &mut rng);
    let costs: Vec<f64> = if cfg.adversarial {
        let singles: Vec<f64> = (0..cfg.n).map(|e| objective.value(&[e])).collect();
        let top = singles
            .iter()
            .copied()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        singles
            .iter()
            .map(|&v| {
                let noise: f64 = rng.gen();
                (cfg.c_max * (0.8 * v / top + 0.2 * noise)).max(cfg.c_max * 1e-3)
            })
            .collect()
    } else {
        (0..cfg.n)
            .map(|_| cfg.c_max * (1.0 - rng.gen::<f64>()))
            .collect()
    };
    let mut name = format!("{}-n{}-s{}", cfg.family, cfg.n, cfg.seed);
    if cfg.adversarial {
        name.push_str("-adv");
    }
    Ok(InstanceFile {
        name: Some(name),
        n: cfg.n,
        costs,
        capacity: 1.0,
        objective,
    })
}

/// Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_monotone_submodular, Instance};

    #[test]
    fn generated_instances_are_submodular() {
        for family in Family::ALL {
            for seed in 0..5 {
                let file = generate(&GenConfig::new(family, 9, seed)).unwrap();
                let inst = Instance::from_file(file).unwrap();
                assert_eq!(
                    check_monotone_submodular(&inst).unwrap(),
                    None,
                    "{family} seed {seed}"
                );
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GenConfig::new(Family::Coverage, 12, 1);
        let a = serde_json::to_string(&generate(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&generate(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other =
            serde_json::to_string(&generate(&GenConfig::new(Family::Coverage, 12, 2)).unwrap())
                .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn adversarial_costs_track_values() {
        let mut cfg = GenConfig::new(Family::Coverage, 200, 3);
        cfg.adversarial = true;
        let file = generate(&cfg).unwrap();
        let singles: Vec<f64> = (0..200).map(|e| file.objective.value(&[e])).collect();
        assert!(pearson(&file.costs, &singles) >= 0.5);
        assert!(file.costs.iter().all(|&c| c > 0.0 && c <= cfg.c_max));
    }

    #[test]
    fn integer_weights_are_integers() {
        let mut cfg = GenConfig::new(Family::Facility, 6, 4);
        cfg.integer_weights = true;
        match generate(&cfg).unwrap().objective {
            Objective::FacilityLocation { similarity } => {
                assert!(similarity.iter().flatten().all(|v| v.fract() == 0.0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(generate(&GenConfig::new(Family::Coverage, 0, 1)).is_err());
        let mut cfg = GenConfig::new(Family::Coverage, 3, 1);
        cfg.c_max = 1.5;
        assert!(generate(&cfg).is_err());
        assert!("bogus".parse::<Family>().is_err());
    }
}
