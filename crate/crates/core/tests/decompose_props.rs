mod common;

use common::{arb_combination, arb_sbv, unit};
use mslift::currents::{cancellations, current_equal, GraphCombination, Term, EQ_TOL};
use mslift::decompose::{decompose, peel_layers, remove_cancellation, swap_adjacent_block};
use mslift::lift::{evaluate, LiftParams};
use mslift::sbv::{ms_energy, Piece, SbvFunction};
use proptest::prelude::*;

fn params(beta: f64, g: SbvFunction) -> LiftParams {
    LiftParams::new(1.0, beta, g).unwrap()
}

fn has_adjacency(t: &GraphCombination) -> bool {
    t.jump_columns().into_iter().any(|x| {
        let js: Vec<_> = t
            .terms()
            .iter()
            .filter_map(|term| term.func.jump_at(x, EQ_TOL))
            .collect();
        js.iter().enumerate().any(|(i, a)| {
            js.iter()
                .enumerate()
                .any(|(j, b)| i != j && (a.right - b.left).abs() <= EQ_TOL)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cancellation_removal(t in arb_combination(5)) {
        let r = remove_cancellation(&t).unwrap();
        prop_assert!(cancellations(&r).is_empty());
        prop_assert!(current_equal(&t, &r, EQ_TOL));
        prop_assert!((r.total_weight() - t.total_weight()).abs() <= 1e-12 * t.total_weight());
    }

    #[test]
    fn layers_give_back_the_weights(t in arb_combination(5)) {
        let layers = peel_layers(&t);
        for term in t.terms() {
            let sum: f64 = layers
                .iter()
                .flat_map(|l| l.terms())
                .filter(|lt| lt.func == term.func)
                .map(|lt| lt.weight)
                .sum();
            let copies = t.terms().iter().filter(|o| o.func == term.func).count() as f64;
            let total: f64 = t.terms().iter().filter(|o| o.func == term.func).map(|o| o.weight).sum();
            prop_assert!((sum - total).abs() <= 1e-9 * copies.max(1.0) * (1.0 + total));
        }
        for l in &layers {
            let w0 = l.terms()[0].weight;
            prop_assert!(l.terms().iter().all(|x| x.weight == w0));
        }
    }

    #[test]
    fn equal_weight_blocks_lose_their_adjacency(fs in proptest::collection::vec(arb_sbv(), 1..5)) {
        let t = GraphCombination::new(fs.into_iter().map(|f| Term::new(1.0, f)).collect()).unwrap();
        let t = remove_cancellation(&t).unwrap();
        if t.terms().iter().all(|x| x.weight == 1.0) {
            let s = swap_adjacent_block(&t).unwrap();
            prop_assert!(!has_adjacency(&s));
            prop_assert!(current_equal(&t, &s, EQ_TOL));
        }
    }

    #[test]
    fn decomposition_invariants(t in arb_combination(6), g in arb_sbv(), beta in 0.0..2.0f64) {
        let ps = params(beta, g);
        let d = decompose(&t, &ps).unwrap();
        let parts = d.as_combination().unwrap();
        prop_assert!(current_equal(&t, &parts, EQ_TOL));
        prop_assert!((parts.total_weight() - t.total_weight()).abs() <= 1e-12 * t.total_weight());
        let lifted = evaluate(&t, &ps).unwrap().total;
        let sum: f64 = d.parts.iter().map(|p| p.mu * ms_energy(&p.func, &ps.g, &ps.ms).unwrap()).sum();
        prop_assert!((lifted - sum).abs() <= 1e-8 * (1.0 + lifted));
        let naive: f64 = t.terms().iter().map(|x| x.weight * ms_energy(&x.func, &ps.g, &ps.ms).unwrap()).sum();
        prop_assert!(sum <= naive + 1e-9);
    }

    #[test]
    fn decomposition_json_round_trip(t in arb_combination(3)) {
        let d = decompose(&t, &params(0.0, SbvFunction::constant(unit(), 0.0))).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: mslift::decompose::Decomposition = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, d);
    }
}

fn step(lo: f64, hi: f64) -> SbvFunction {
    SbvFunction::new(
        unit(),
        vec![
            Piece::linear(0.0, 0.5, lo, lo),
            Piece::linear(0.5, 1.0, hi, hi),
        ],
    )
    .unwrap()
}

#[test]
fn weights_two_and_one_on_a_cancelling_pair() {
    let t = GraphCombination::new(vec![
        Term::new(2.0, step(0.0, 2.0)),
        Term::new(1.0, step(2.0, 0.0)),
    ])
    .unwrap();
    let r = remove_cancellation(&t).unwrap();
    let weights: Vec<f64> = r.terms().iter().map(|x| x.weight).collect();
    assert_eq!(weights, vec![1.0, 1.0, 1.0]);
    assert_eq!(r.terms()[2].func, step(0.0, 2.0));
}

#[test]
fn no_adjacency_is_left_alone() {
    let t = GraphCombination::new(vec![
        Term::new(1.0, step(0.0, 1.0)),
        Term::new(1.0, step(2.0, 3.0)),
    ])
    .unwrap();
    assert_eq!(swap_adjacent_block(&t).unwrap(), t);
}
