use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use submod_knapsack::baselines::{brute_force_opt, cost_of, density_greedy_baseline, sviridenko};
use submod_knapsack::generate::{generate, Family, GenConfig};
use submod_knapsack::guessing::GuessGrid;
use submod_knapsack::knapsack::{knapsack, KnapsackParams, Mode};
use submod_knapsack::lazy_greedy::{self, LazyGreedyConfig};
use submod_knapsack::multilinear::{Multilinear, SparseFractionalPoint};
use submod_knapsack::oracle::{
    check_monotone_submodular, CountingOracle, Instance, InstanceFile, SetFunction,
};
use submod_knapsack::rounding::round_seeded;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Coverage),
        Just(Family::Facility),
        Just(Family::ConcaveModular)
    ]
}

fn instance(family: Family, n: usize, seed: u64) -> Instance {
    Instance::from_file(generate(&GenConfig::new(family, n, seed)).unwrap()).unwrap()
}

fn point(n: usize, coords: &[(usize, f64)], whole: &[usize]) -> SparseFractionalPoint {
    let frac: BTreeMap<usize, f64> = coords
        .iter()
        .filter(|(e, _)| *e < n && !whole.contains(e))
        .copied()
        .collect();
    let whole: BTreeSet<usize> = whole.iter().copied().filter(|&e| e < n).collect();
    SparseFractionalPoint::from_parts(whole, frac).unwrap()
}

/// Exhaustive optimum written independently of the library's search.
fn naive_opt(f: &dyn SetFunction, costs: &[f64]) -> f64 {
    let n = costs.len();
    (0..1usize << n)
        .map(|mask| (0..n).filter(|e| mask >> e & 1 == 1).collect::<Vec<_>>())
        .filter(|s| cost_of(costs, s) <= 1.0 + 1e-9)
        .map(|s| f.value(&s))
        .fold(0.0, f64::max)
}

#[test]
fn generated_families_are_monotone_submodular() {
    for f in Family::ALL {
        for seed in 0..100 {
            let n = 4 + (seed as usize % 9);
            let inst = instance(f, n, seed);
            assert_eq!(
                check_monotone_submodular(&inst).unwrap(),
                None,
                "{f} n={n} seed={seed}"
            );
        }
    }
}

#[test]
fn brute_force_matches_naive_enumeration() {
    for seed in 0..50u64 {
        let f = Family::ALL[seed as usize % 3];
        let inst = instance(f, 6 + seed as usize % 9, 700 + seed);
        let (set, value) = brute_force_opt(&inst, inst.costs()).unwrap();
        let naive = naive_opt(&inst, inst.costs());
        assert!(
            (value - naive).abs() <= 1e-9 * naive.max(1.0),
            "seed {seed}: {value} vs {naive}"
        );
        assert!((inst.value(&set) - value).abs() <= 1e-9 * naive.max(1.0));
        assert!(cost_of(inst.costs(), &set) <= 1.0 + 1e-9);
    }
}

#[test]
fn instance_json_round_trips() {
    let file = generate(&GenConfig::new(Family::Facility, 7, 9)).unwrap();
    let text = serde_json::to_string(&file).unwrap();
    let back: InstanceFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
}

#[test]
fn capacity_normalizes_and_drops_oversized_elements() {
    let text = r#"{"n": 3, "costs": [2, 5, 4], "capacity": 4,
        "objective": {"type": "coverage", "weights": [1, 2, 3], "sets": [[0], [1], [2]]}}"#;
    let inst = Instance::from_file(serde_json::from_str(text).unwrap()).unwrap();
    assert_eq!(inst.costs(), &[0.5, 1.0]);
    assert_eq!(inst.original_ids(), &[0, 2]);
    assert_eq!(inst.value(&[1]), 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counting_oracle_is_transparent(f in family(), seed in 0u64..1000, mask in 0u32..1024) {
        let inst = instance(f, 10, seed);
        let oracle = CountingOracle::new(&inst);
        let set: Vec<usize> = (0..10).filter(|e| mask >> e & 1 == 1).collect();
        prop_assert_eq!(oracle.value(&set), inst.value(&set));
        prop_assert_eq!(oracle.value(&set), inst.value(&set));
        prop_assert_eq!(oracle.query_count(), 2);
        oracle.reset_count();
        prop_assert_eq!(oracle.query_count(), 0);
    }

    #[test]
    fn extension_agrees_on_integral_points(f in family(), seed in 0u64..1000, mask in 0u32..512) {
        let inst = instance(f, 9, seed);
        let set: Vec<usize> = (0..9).filter(|e| mask >> e & 1 == 1).collect();
        let x = SparseFractionalPoint::from_set(set.iter().copied());
        prop_assert_eq!(Multilinear::new(&inst).eval_exact(&x).unwrap(), inst.value(&set));
    }

    #[test]
    fn extension_is_affine_in_each_coordinate(
        f in family(),
        seed in 0u64..1000,
        coords in prop::collection::vec((0usize..10, 0.05f64..0.95), 1..6),
        e in 0usize..10,
        a in 0.0f64..1.0,
    ) {
        let inst = instance(f, 10, seed);
        let eval = Multilinear::new(&inst);
        let x = point(10, &coords, &[]);
        let at = |v: f64| eval.eval_exact(&x.with_coordinate(e, v).unwrap()).unwrap();
        let (lo, hi) = (at(0.0), at(1.0));
        let scale = hi.abs().max(1.0);
        prop_assert!((at(a) - ((1.0 - a) * lo + a * hi)).abs() <= 1e-9 * scale);
        // monotone in every coordinate
        prop_assert!(hi >= lo - 1e-9 * scale);
        let marginal = eval.marginal_up(&x, e).unwrap();
        prop_assert!((marginal - (hi - at(x.coordinate(e)))).abs() <= 1e-9 * scale);
    }

    #[test]
    fn rounding_keeps_integral_part_and_support(
        coords in prop::collection::vec((0usize..12, 0.05f64..0.95), 1..8),
        whole in prop::collection::vec(0usize..12, 0..3),
        seed in any::<u64>(),
    ) {
        let costs: Vec<f64> = (0..12).map(|e| 0.02 + 0.01 * e as f64).collect();
        let x = point(12, &coords, &whole);
        let t = round_seeded(&x, &costs, seed).unwrap();
        prop_assert!(x.integral().is_subset(&t.result));
        for e in &t.result {
            prop_assert!(x.coordinate(*e) > 0.0);
        }
        prop_assert_eq!(&round_seeded(&x, &costs, seed).unwrap().result, &t.result);
        let up: BTreeSet<usize> = t.rounded_up.iter().copied().collect();
        let survivors: BTreeSet<usize> = t.result.difference(x.integral()).copied().collect();
        prop_assert_eq!(&up, &survivors);
        let mass = x.fractional_mass();
        prop_assert!(up.len() as f64 >= (mass - 1e-9).floor());
        prop_assert!(up.len() as f64 <= (mass - 1e-9).ceil());
    }

    #[test]
    fn lazy_greedy_respects_budget_and_target(f in family(), seed in 0u64..1000, eps in 0.05f64..0.6) {
        let inst = instance(f, 30, seed);
        let oracle = CountingOracle::new(&inst);
        let all: Vec<usize> = (0..30).collect();
        let everything = inst.value(&all);
        let target = 0.5 * everything;
        let cfg = LazyGreedyConfig::new(eps, 30, target).with_budget(1.0).with_shadow();
        let res = lazy_greedy::run(&oracle, &SparseFractionalPoint::zero(), inst.costs(), &all, &cfg).unwrap();
        prop_assert!(res.cost <= 1.0 + 1e-9);
        prop_assert!(res.shadow.iter().all(|s| s.passed));
        prop_assert!((inst.value(&res.selected) - res.gain_achieved).abs() <= 1e-9 * everything.max(1.0));
        let picked: BTreeSet<usize> = res.selected.iter().copied().collect();
        prop_assert_eq!(picked.len(), res.selected.len());
    }

    #[test]
    fn baselines_are_feasible_and_ordered(f in family(), seed in 0u64..1000, n in 4usize..11) {
        let inst = instance(f, n, seed);
        let costs = inst.costs();
        let oracle = CountingOracle::new(&inst);
        let (_, opt) = brute_force_opt(&inst, costs).unwrap();
        let greedy = density_greedy_baseline(&oracle, costs, 0.1).unwrap();
        let svir = sviridenko(&oracle, costs).unwrap();
        for r in [&greedy, &svir] {
            prop_assert!(r.is_feasible());
            prop_assert!(r.value <= opt + 1e-9 * opt.max(1.0));
        }
        prop_assert!(svir.value >= (1.0 - (-1.0f64).exp()) * opt - 1e-9);
    }

    #[test]
    fn guess_count_matches_enumeration(
        t in 1usize..3, r in 1usize..3, phases in 1usize..3, stride in 1u64..4,
    ) {
        let grid = GuessGrid::new(0.5, 1.0).unwrap().with_t(t).with_r(r).with_phases(phases)
            .with_strides(submod_knapsack::guessing::Strides { v: stride, big_w: 1, w: stride });
        let count = grid.sequence_count().unwrap();
        prop_assume!(count <= 200_000);
        prop_assert_eq!(grid.enumerate(count).unwrap().count() as u128, count);
        prop_assert!(grid.enumerate(count - 1).err().is_some_and(|e| e.is_capacity()));
    }

    #[test]
    fn driver_never_loses_to_its_baseline(f in family(), seed in 0u64..200) {
        let inst = instance(f, 9, seed);
        let costs = inst.costs();
        let mut params = KnapsackParams::new(0.5, Mode::Practical { v: 2, big_w: 1, w: 4 });
        params.t = Some(1);
        params.r = Some(1);
        params.phases = Some(1);
        params.seed = seed;
        let report = knapsack(&inst, costs, &params).unwrap();
        prop_assert!(report.best.is_feasible());
        prop_assert!(report.best.value >= report.baseline.value);
        prop_assert!((inst.value(&report.best.set) - report.best.value).abs() <= 1e-9 * report.best.value.max(1.0));
    }
}
