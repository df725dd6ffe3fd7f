use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::objective::{Objective, SetFunction};
use crate::error::{Error, Result};

fn unit_capacity() -> f64 {
    1.0
}

/// On-disk instance format.
///
/// ```json
/// {"n": 3, "costs": [0.5, 0.6, 0.4], "capacity": 1.0,
///  "objective": {"type": "coverage", "weights": [1, 1], "sets": [[0], [1], [0, 1]]}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub costs: Vec<f64>,
    #[serde(default = "unit_capacity")]
    pub capacity: f64,
    pub objective: Objective,
}

/// A knapsack instance with budget normalized to 1.
///
/// Elements whose normalized cost exceeds 1 can never be part of a feasible
/// solution and are dropped at construction; the survivors are re-indexed
/// densely and `original_ids` maps back to the file's ids.
#[derive(Debug, Clone)]
pub struct Instance {
    name: Option<String>,
    costs: Vec<f64>,
    objective: Objective,
    original_ids: Vec<usize>,
}

impl Instance {
    /// Builds an instance with capacity 1.
    pub fn new(costs: Vec<f64>, objective: Objective) -> Result<Self> {
        Self::from_file(InstanceFile {
            name: None,
            n: costs.len(),
            costs,
            capacity: 1.0,
            objective,
        })
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let InstanceFile {
            name,
            n,
            costs,
            capacity,
            objective,
        } = file;
        if costs.len() != n {
            return Err(Error::InvalidInput(format!(
                "declared n = {n} but {} costs given",
                costs.len()
            )));
        }
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        objective.validate(n)?;
        if let Some((e, c)) = costs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c <= 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "element {e} has cost {c}; costs must be positive"
            )));
        }

        let normalized: Vec<f64> = costs.iter().map(|c| c / capacity).collect();
        let keep: Vec<usize> = (0..n).filter(|&e| normalized[e] <= 1.0).collect();
        let objective = if keep.len() == n {
            objective
        } else {
            objective.restrict(&keep)
        };
        Ok(Instance {
            name,
            costs: keep.iter().map(|&e| normalized[e]).collect(),
            objective,
            original_ids: keep,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            name: self.name.clone(),
            n: self.len(),
            costs: self.costs.clone(),
            capacity: 1.0,
            objective: self.objective.clone(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn original_ids(&self) -> &[usize] {
        &self.original_ids
    }

    pub fn cost_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&e| self.costs[e]).sum()
    }

    /// Range-checked evaluation of `f(set)`.
    pub fn eval(&self, set: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.len()];
        for &e in set {
            if e >= self.len() {
                return Err(Error::InvalidInput(format!(
                    "element {e} out of range for ground set of size {}",
                    self.len()
                )));
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidInput(format!("element {e} listed twice")));
            }
        }
        Ok(self.objective.value(set))
    }
}

impl SetFunction for Instance {
    fn ground_size(&self) -> usize {
        self.len()
    }

    fn value(&self, set: &[usize]) -> f64 {
        self.objective.value(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coverage(n: usize) -> Objective {
        Objective::Coverage {
            weights: vec![1.0; n],
            sets: (0..n).map(|e| vec![e]).collect(),
        }
    }

    #[test]
    fn costs_are_normalized_and_oversized_elements_dropped() {
        let inst = Instance::from_file(InstanceFile {
            name: None,
            n: 3,
            costs: vec![1.0, 3.0, 2.0],
            capacity: 2.0,
            objective: coverage(3),
        })
        .unwrap();
        assert_eq!(inst.costs(), &[0.5, 1.0]);
        assert_eq!(inst.original_ids(), &[0, 2]);
        // element 1 of the restricted instance is element 2 of the file
        assert_eq!(inst.eval(&[1]).unwrap(), 1.0);
    }

    #[test]
    fn eval_rejects_out_of_range_and_duplicates() {
        let inst = Instance::new(vec![0.5, 0.5], coverage(2)).unwrap();
        assert!(inst.eval(&[2]).is_err());
        assert!(inst.eval(&[0, 0]).is_err());
        assert_eq!(inst.eval(&[]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_costs_and_mismatched_n() {
        assert!(Instance::new(vec![0.0], coverage(1)).is_err());
        assert!(Instance::from_file(InstanceFile {
            name: None,
            n: 2,
            costs: vec![0.5],
            capacity: 1.0,
            objective: coverage(1),
        })
        .is_err());
    }

    #[test]
    fn json_round_trip_with_default_capacity() {
        let text = r#"{"n": 2, "costs": [0.25, 0.5],
            "objective": {"type": "facility", "similarity": [[1.0, 0.5]]}}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        assert_eq!(file.capacity, 1.0);
        let inst = Instance::from_file(file).unwrap();
        let back: InstanceFile =
            serde_json::from_str(&serde_json::to_string(&inst.to_file()).unwrap()).unwrap();
        assert_eq!(back, inst.to_file());
    }
}
