mod common;

use common::{arb_combination, arb_sbv, arb_weight, unit};
use mslift::currents::{
    branch_form, current_equal, mass, restrict_outside, slice_profile, ColumnProfile,
    GraphCombination, Term, EQ_TOL,
};
use mslift::sbv::{Domain, Piece, SbvFunction};
use mslift::solver::perturb_inside;
use proptest::prelude::*;

fn columns_of(ts: &[&GraphCombination]) -> Vec<f64> {
    let mut xs: Vec<f64> = ts.iter().flat_map(|t| t.jump_columns()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Exchanges the tails of terms `i` and `j` (equal weights) at `x`.
fn tail_swap(t: &GraphCombination, i: usize, j: usize, x: f64) -> GraphCombination {
    let mut terms = t.terms().to_vec();
    let (fi, fj) = (&t.terms()[i].func, &t.terms()[j].func);
    terms[i].func = SbvFunction::splice(fi, fj, x, 0.0).unwrap();
    terms[j].func = SbvFunction::splice(fj, fi, x, 0.0).unwrap();
    GraphCombination::new(terms).unwrap()
}

#[test]
fn overlapping_up_jumps() {
    let step = |lo: f64, hi: f64| {
        SbvFunction::new(
            unit(),
            vec![
                Piece::linear(0.0, 0.5, lo, lo),
                Piece::linear(0.5, 1.0, hi, hi),
            ],
        )
        .unwrap()
    };
    let t = GraphCombination::new(vec![
        Term::new(1.0, step(1.0, 2.0)),
        Term::new(1.0, step(0.0, 3.0)),
    ])
    .unwrap();
    let p = slice_profile(&t, 0.5).unwrap();
    assert_eq!(
        p,
        ColumnProfile::new(0.5, vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 1.0]).unwrap()
    );
}

proptest! {
    #[test]
    fn profiles_add(t1 in arb_combination(3), t2 in arb_combination(3)) {
        let sum = t1.plus(&t2).unwrap();
        for x in columns_of(&[&t1, &t2]) {
            let p = slice_profile(&t1, x).unwrap().sum(&slice_profile(&t2, x).unwrap(), EQ_TOL);
            prop_assert!(slice_profile(&sum, x).unwrap().approx_eq(&p, 1e-12));
        }
    }

    #[test]
    fn profiles_scale(t in arb_combination(4), c in 0.1..5.0f64) {
        let s = t.scaled(c).unwrap();
        for x in t.jump_columns() {
            let p = slice_profile(&t, x).unwrap().scaled(c);
            prop_assert!(slice_profile(&s, x).unwrap().approx_eq(&p, 1e-12));
        }
    }

    #[test]
    fn profile_integrates_signed_jump_heights(t in arb_combination(4)) {
        for x in t.jump_columns() {
            let p = slice_profile(&t, x).unwrap();
            let integral: f64 = p.intervals().map(|(lo, hi, l)| l * (hi - lo)).sum();
            let expected: f64 = t
                .terms()
                .iter()
                .filter_map(|term| term.func.jump_at(x, EQ_TOL).map(|j| term.weight * (j.right - j.left)))
                .sum();
            prop_assert!((integral - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn mass_is_additive(t1 in arb_combination(3), t2 in arb_combination(3)) {
        let m = mass(&t1.plus(&t2).unwrap());
        prop_assert!((m - mass(&t1) - mass(&t2)).abs() <= 1e-9 * (1.0 + m));
    }

    #[test]
    fn equality_ignores_representation(t in arb_combination(4), k in 0usize..4) {
        prop_assert!(current_equal(&t, &t, EQ_TOL));
        let mut rev = t.terms().to_vec();
        rev.reverse();
        prop_assert!(current_equal(&t, &GraphCombination::new(rev).unwrap(), EQ_TOL));
        let k = k % t.len();
        let mut split = t.terms().to_vec();
        let half = split[k].weight / 2.0;
        split[k].weight = half;
        split.push(Term::new(half, split[k].func.clone()));
        let split = GraphCombination::new(split).unwrap();
        prop_assert!(current_equal(&t, &split, EQ_TOL));
        prop_assert!(current_equal(&split, &t, EQ_TOL));
        prop_assert!(current_equal(&t, &t.coalesced(), EQ_TOL));
    }

    #[test]
    fn tail_swaps_preserve_the_current(f in arb_sbv(), g in arb_sbv(), w in arb_weight(), k in 1u32..12) {
        let t = GraphCombination::new(vec![Term::new(w, f), Term::new(w, g)]).unwrap();
        let s = tail_swap(&t, 0, 1, k as f64 / 12.0);
        prop_assert!(current_equal(&t, &s, EQ_TOL));
        prop_assert_eq!(branch_form(&t).cells.len(), branch_form(&s).cells.len());
    }

    #[test]
    fn tail_swaps_with_unequal_weights_change_the_current(f in arb_sbv(), g in arb_sbv(), k in 1u32..12) {
        let x = k as f64 / 12.0;
        let t = GraphCombination::new(vec![Term::new(1.0, f.clone()), Term::new(2.0, g.clone())]).unwrap();
        let s = GraphCombination::new(vec![
            Term::new(1.0, SbvFunction::splice(&f, &g, x, 0.0).unwrap()),
            Term::new(2.0, SbvFunction::splice(&g, &f, x, 0.0).unwrap()),
        ]).unwrap();
        let same_tail = f.clip(x, 1.0) == g.clip(x, 1.0);
        prop_assert_eq!(current_equal(&t, &s, EQ_TOL), same_tail || f.approx_eq(&g, 0.0));
    }

    #[test]
    fn json_round_trip(t in arb_combination(4)) {
        let s = serde_json::to_string(&t).unwrap();
        let back: GraphCombination = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn competitors_match_outside(u in arb_sbv(), seed in any::<u64>()) {
        let d = Domain::new(0.0, 1.0, 0.25, 0.75).unwrap();
        let target = restrict_outside(&GraphCombination::graph(u.clone()), &d).unwrap();
        for t in perturb_inside(&u, &d, seed, 5) {
            prop_assert!(restrict_outside(&t, &d).unwrap().approx_eq(&target, EQ_TOL));
        }
    }
}

#[test]
fn different_graphs_are_different_currents() {
    let a = GraphCombination::graph(SbvFunction::linear(unit(), 0.0, 1.0));
    let b = GraphCombination::graph(SbvFunction::linear(unit(), 0.0, 1.1));
    assert!(!current_equal(&a, &b, EQ_TOL));
    assert!(!current_equal(&a, &a.scaled(2.0).unwrap(), EQ_TOL));
}

#[test]
fn negative_weight_json_is_rejected() {
    let json = r#"{"terms":[{"weight":-1,"func":{"domain":[0,1],"pieces":[{"nodes":[0,1],"values":[0,0]}]}}]}"#;
    let err = serde_json::from_str::<GraphCombination>(json).unwrap_err();
    assert!(err.to_string().contains("weight"));
}
