//! Random lift/drop sequences must preserve the circuit value, keep the
//! topological numbering, and leave `react` consistent with full evaluation.

use proptest::prelude::*;
use resin_core::circuit::ReactiveCircuit;
use resin_core::grounder::{build_wmc_polynomial, StableModel};
use resin_core::SemiringInstance;

#[derive(Debug, Clone)]
enum Step {
    Lift(Vec<usize>),
    Drop(Vec<usize>),
    Update(usize, f64),
}

fn circuit_strategy() -> impl Strategy<Value = (usize, Vec<u64>, Vec<f64>)> {
    (1usize..=10).prop_flat_map(|n| {
        let space = 1u64 << n;
        (
            Just(n),
            prop::collection::btree_set(0..space, 0..=64usize.min(space as usize))
                .prop_map(|s| s.into_iter().collect::<Vec<_>>()),
            prop::collection::vec(0.0f64..=1.0, n),
        )
    })
}

fn step_strategy(n: usize) -> impl Strategy<Value = Step> {
    let vars = prop::collection::vec(0..n, 0..=3);
    prop_oneof![
        vars.clone().prop_map(Step::Lift),
        vars.prop_map(Step::Drop),
        (0..n, 0.0f64..=1.0).prop_map(|(v, w)| Step::Update(v, w)),
    ]
}

fn build(n: usize, models: &[u64], weights: &[f64]) -> ReactiveCircuit {
    let names = (0..n).map(|i| format!("s{i}")).collect();
    let models: Vec<_> = models
        .iter()
        .map(|&b| StableModel::from_bits(b, n))
        .collect();
    let poly = build_wmc_polynomial(names, &models);
    let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
    for (v, &w) in weights.iter().enumerate() {
        rc.set_weight(v, w).unwrap();
    }
    rc
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adaptation_preserves_value(
        (n, models, weights) in circuit_strategy(),
        raw in prop::collection::vec(step_strategy(10), 1..=20),
    ) {
        let mut rc = build(n, &models, &weights);
        let mut flat = rc.clone();
        rc.evaluate_full().unwrap();
        for step in raw {
            match step {
                Step::Lift(vs) => {
                    let vs: Vec<usize> = vs.into_iter().map(|v| v % n).collect();
                    rc.lift(&vs).unwrap();
                }
                Step::Drop(vs) => {
                    let vs: Vec<usize> = vs.into_iter().map(|v| v % n).collect();
                    rc.drop(&vs).unwrap();
                }
                Step::Update(v, w) => {
                    let v = v % n;
                    rc.set_weight(v, w).unwrap();
                    rc.invalidate(v).unwrap();
                    flat.set_weight(v, w).unwrap();
                    rc.react().unwrap();
                }
            }
            prop_assert!(rc.check_invariants().is_ok(), "{:?}", rc.check_invariants());
            let expected = flat.evaluate_full().unwrap();
            let got = rc.root_value().unwrap();
            prop_assert!(close(got, expected), "{got} vs {expected}");
            let mut scratch = rc.clone();
            prop_assert!(close(scratch.evaluate_full().unwrap(), expected));
        }
    }

    #[test]
    fn react_cost_matches_dependency_sums(
        (n, models, weights) in circuit_strategy(),
        drops in prop::collection::vec(0usize..10, 0..6),
        updates in prop::collection::vec((0usize..10, 0.0f64..=1.0), 1..30),
    ) {
        let mut rc = build(n, &models, &weights);
        rc.evaluate_full().unwrap();
        let drops: Vec<usize> = drops.into_iter().map(|v| v % n).collect();
        rc.drop(&drops).unwrap();
        let mut analytic = 0;
        let mut measured = 0;
        for (v, w) in updates {
            let v = v % n;
            rc.set_weight(v, w).unwrap();
            rc.invalidate(v).unwrap();
            analytic += rc.dep_omega(v);
            measured += rc.react().unwrap().1;
        }
        prop_assert_eq!(measured, analytic);
    }

    #[test]
    fn gain_is_at_least_one(
        (n, models, weights) in circuit_strategy(),
        drops in prop::collection::vec(0usize..10, 0..8),
        lambda in prop::collection::vec(0.0f64..50.0, 10),
    ) {
        let mut rc = build(n, &models, &weights);
        rc.evaluate_full().unwrap();
        let drops: Vec<usize> = drops.into_iter().map(|v| v % n).collect();
        rc.drop(&drops).unwrap();
        let r = rc.rates(&lambda[..n]).unwrap();
        prop_assert!(r.rho_rc <= r.rho_max + 1e-9);
        prop_assert!(r.gain >= 1.0 - 1e-12);
    }
}

#[test]
fn any_pair_circuit_isolates_fast_signals() {
    let n = 10;
    let models: Vec<u64> = (1..1u64 << n).collect();
    let mut rc = build(n, &models, &[0.1; 10]);
    assert_eq!(rc.total_omega(), 10229);
    rc.evaluate_full().unwrap();
    rc.drop(&(2..n).collect::<Vec<_>>()).unwrap();
    rc.check_invariants().unwrap();
    assert_eq!(rc.omega(0), 11);
    assert_eq!(rc.layers(), 2);
    let mut fresh = rc.clone();
    assert!(close(
        rc.root_value().unwrap(),
        fresh.evaluate_full().unwrap()
    ));
}
