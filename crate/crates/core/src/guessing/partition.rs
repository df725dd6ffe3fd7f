use serde::Serialize;

use crate::oracle::SetFunction;

/// Orders `opt` so that each element has the largest marginal gain over the
/// elements before it. Ties go to the lowest id.
pub fn greedy_order_opt(f: &dyn SetFunction, opt: &[usize]) -> Vec<usize> {
    let mut remaining: Vec<usize> = opt.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    let mut order = Vec::with_capacity(remaining.len());
    let mut base = f.value(&[]);
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64, f64)> = None;
        for (pos, &o) in remaining.iter().enumerate() {
            let mut set = order.clone();
            set.push(o);
            let value = f.value(&set);
            let gain = value - base;
            if best.is_none_or(|(_, g, _)| gain > g) {
                best = Some((pos, gain, value));
            }
        }
        let (pos, _, value) = best.expect("remaining is nonempty");
        order.push(remaining.remove(pos));
        base = value;
    }
    order
}

/// Split of a greedily ordered optimum into its first `t` elements and the
/// cheap remainder.
#[derive(Debug, Clone, Serialize)]
pub struct OptPartition {
    pub opt_set: Vec<usize>,
    pub opt_value: f64,
    pub greedy_order: Vec<usize>,
    pub opt1: Vec<usize>,
    pub opt2: Vec<usize>,
    /// Elements after the first `t` that cost more than `heavy_threshold`.
    pub dropped: Vec<usize>,
    pub heavy_threshold: f64,
    pub opt1_value: f64,
    pub opt1_cost: f64,
    pub opt2_cost: f64,
    /// `(o, f(OPT₁ ∪ {o}) − f(OPT₁))` for every element after the first `t`.
    pub tail_marginals: Vec<(usize, f64)>,
}

impl OptPartition {
    pub fn tail_marginals_bounded(&self, t: usize, tol: f64) -> bool {
        let bound = self.opt1_value / t.max(1) as f64;
        self.tail_marginals.iter().all(|&(_, m)| m <= bound + tol)
    }
}

pub fn partition_opt(
    f: &dyn SetFunction,
    costs: &[f64],
    order: &[usize],
    epsilon: f64,
    t: usize,
) -> OptPartition {
    let split = t.min(order.len());
    let opt1 = order[..split].to_vec();
    let opt1_cost: f64 = opt1.iter().map(|&e| costs[e]).sum();
    let heavy_threshold = epsilon * epsilon * (1.0 - opt1_cost);
    let opt1_value = f.value(&opt1);
    let mut opt2 = Vec::new();
    let mut dropped = Vec::new();
    let mut tail_marginals = Vec::new();
    for &o in &order[split..] {
        let mut set = opt1.clone();
        set.push(o);
        tail_marginals.push((o, f.value(&set) - opt1_value));
        if costs[o] > heavy_threshold {
            dropped.push(o);
        } else {
            opt2.push(o);
        }
    }
    let opt2_cost = opt2.iter().map(|&e| costs[e]).sum();
    let mut opt_set = order.to_vec();
    opt_set.sort_unstable();
    OptPartition {
        opt_value: f.value(&opt_set),
        opt_set,
        greedy_order: order.to_vec(),
        opt1,
        opt2,
        dropped,
        heavy_threshold,
        opt1_value,
        opt1_cost,
        opt2_cost,
        tail_marginals,
    }
}
