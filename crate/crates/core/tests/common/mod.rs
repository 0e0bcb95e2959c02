//! Random instances shared by the property suites and the acceptance runner.
#![allow(dead_code)]

use mslift::currents::{ColumnProfile, GraphCombination, Term};
use mslift::sbv::{Domain, Interval, Piece, SbvFunction};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

/// Values on a half-integer lattice or drawn continuously, so that equal
/// traces (adjacency, merging, cancellation) occur often.
pub fn value<R: Rng>(rng: &mut R, lattice: bool) -> f64 {
    if lattice {
        rng.gen_range(-6..=6) as f64 / 2.0
    } else {
        rng.gen_range(-3.0..3.0)
    }
}

/// A piecewise-linear SBV function on `(0, 1)` with at most `max_pieces`
/// pieces, jump abscissae drawn from the grid `k/12`.
pub fn random_sbv<R: Rng>(rng: &mut R, max_pieces: usize) -> SbvFunction {
    let lattice = rng.gen_bool(0.5);
    let cuts = rng.gen_range(0..max_pieces);
    let mut grid: Vec<u32> = (1..12).collect();
    grid.shuffle(rng);
    let mut xs: Vec<f64> = grid[..cuts].iter().map(|&k| k as f64 / 12.0).collect();
    xs.sort_by(f64::total_cmp);
    build_pieces(rng, &xs, lattice)
}

fn build_pieces<R: Rng>(rng: &mut R, cuts: &[f64], lattice: bool) -> SbvFunction {
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(cuts);
    bounds.push(1.0);
    let pieces = bounds
        .windows(2)
        .map(|w| {
            let mut nodes = vec![w[0]];
            if rng.gen_bool(0.3) {
                nodes.push(0.5 * (w[0] + w[1]));
            }
            nodes.push(w[1]);
            let values = nodes.iter().map(|_| value(rng, lattice)).collect();
            Piece::new(nodes, values)
        })
        .collect();
    SbvFunction::new(unit(), pieces).unwrap()
}

/// Measurement for fidelity terms: a coarse piecewise-linear function.
pub fn random_g<R: Rng>(rng: &mut R) -> SbvFunction {
    random_sbv(rng, 3)
}

/// Combination with `k ≤ max_terms` graphs whose jumps share a small set of
/// abscissae, with `|S_T| ≤ max_columns`. Weights mix lattice and continuous
/// draws in `(0, 3]`.
pub fn random_combination<R: Rng>(
    rng: &mut R,
    max_terms: usize,
    max_columns: usize,
) -> GraphCombination {
    let k = rng.gen_range(1..=max_terms);
    let mut grid: Vec<u32> = (1..12).collect();
    grid.shuffle(rng);
    let ncols = rng.gen_range(1..=max_columns.min(11));
    let columns: Vec<f64> = grid[..ncols].iter().map(|&c| c as f64 / 12.0).collect();
    let lattice = rng.gen_bool(0.7);
    let terms = (0..k)
        .map(|_| {
            let mut cuts: Vec<f64> = columns
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.5))
                .collect();
            cuts.sort_by(f64::total_cmp);
            let f = build_pieces(rng, &cuts, lattice);
            Term::new(weight(rng), f)
        })
        .collect();
    GraphCombination::new(terms).unwrap()
}

pub fn weight<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.5) {
        rng.gen_range(1..=6) as f64 / 2.0
    } else {
        3.0 * (1.0 - rng.gen::<f64>())
    }
}

/// A merged profile with `1 ≤ m ≤ max_m` intervals and levels in `[-3, 3]`.
pub fn random_profile<R: Rng>(rng: &mut R, max_m: usize) -> ColumnProfile {
    let m = rng.gen_range(1..=max_m);
    let mut levels: Vec<f64> = Vec::with_capacity(m);
    while levels.len() < m {
        let l = if rng.gen_bool(0.5) {
            rng.gen_range(-6..=6) as f64 / 2.0
        } else {
            rng.gen_range(-3.0..3.0)
        };
        let ok_prev = levels.last().map_or(l != 0.0, |&p| p != l);
        let ok_end = levels.len() + 1 < m || l != 0.0;
        if ok_prev && ok_end {
            levels.push(l);
        }
    }
    let breakpoints = increasing(rng, m + 1);
    ColumnProfile::new(0.5, breakpoints, levels).unwrap()
}

/// Positive profile on the half-integer lattice (exact arithmetic).
pub fn random_positive_profile<R: Rng>(rng: &mut R, max_m: usize) -> ColumnProfile {
    let m = rng.gen_range(1..=max_m);
    let mut levels: Vec<f64> = Vec::with_capacity(m);
    while levels.len() < m {
        let l = rng.gen_range(1..=6) as f64 / 2.0;
        if levels.last() != Some(&l) {
            levels.push(l);
        }
    }
    let breakpoints = increasing(rng, m + 1);
    ColumnProfile::new(0.5, breakpoints, levels).unwrap()
}

fn increasing<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut t = rng.gen_range(-3.0..0.0);
    (0..n)
        .map(|_| {
            let cur = t;
            t += rng.gen_range(0.05..1.5);
            cur
        })
        .collect()
}

pub fn inner_domain<R: Rng>(rng: &mut R) -> Domain {
    let ia = rng.gen_range(1..=3) as f64 / 12.0;
    let ib = 1.0 - rng.gen_range(1..=3) as f64 / 12.0;
    Domain::new(0.0, 1.0, ia, ib).unwrap()
}

/// Local maxima minus the minima between consecutive maxima.
pub fn maxmin(levels: &[f64]) -> f64 {
    let mut ext = vec![0.0];
    ext.extend_from_slice(levels);
    ext.push(0.0);
    let mut maxima = Vec::new();
    let mut minima_between = Vec::new();
    let mut running_min = f64::INFINITY;
    for i in 1..ext.len() - 1 {
        if ext[i] > ext[i - 1] && ext[i] > ext[i + 1] {
            if !maxima.is_empty() {
                minima_between.push(running_min);
            }
            maxima.push(ext[i]);
            running_min = f64::INFINITY;
        } else {
            running_min = running_min.min(ext[i]);
        }
    }
    maxima.iter().sum::<f64>() - minima_between.iter().sum::<f64>()
}

// proptest strategies

pub fn arb_value() -> impl Strategy<Value = f64> {
    prop_oneof![(-6i32..=6).prop_map(|k| k as f64 / 2.0), -3.0..3.0f64]
}

/// SBV functions on `(0, 1)` with up to four jumps on the grid `k/12`.
pub fn arb_sbv() -> impl Strategy<Value = SbvFunction> {
    (
        proptest::sample::subsequence((1..12u32).collect::<Vec<_>>(), 0..=4),
        proptest::collection::vec(arb_value(), 15),
        proptest::collection::vec(any::<bool>(), 5),
    )
        .prop_map(|(cuts, vals, kinks)| {
            let mut bounds = vec![0.0];
            bounds.extend(cuts.iter().map(|&k| k as f64 / 12.0));
            bounds.push(1.0);
            let mut next = vals.into_iter();
            let pieces = bounds
                .windows(2)
                .zip(kinks)
                .map(|(w, kink)| {
                    let nodes = if kink {
                        vec![w[0], 0.5 * (w[0] + w[1]), w[1]]
                    } else {
                        vec![w[0], w[1]]
                    };
                    let values = nodes.iter().map(|_| next.next().unwrap()).collect();
                    Piece::new(nodes, values)
                })
                .collect();
            SbvFunction::new(unit(), pieces).unwrap()
        })
}

pub fn arb_weight() -> impl Strategy<Value = f64> {
    prop_oneof![(1i32..=6).prop_map(|k| k as f64 / 2.0), 0.01..3.0f64]
}

pub fn arb_combination(max_terms: usize) -> impl Strategy<Value = GraphCombination> {
    proptest::collection::vec((arb_weight(), arb_sbv()), 1..=max_terms).prop_map(|ts| {
        GraphCombination::new(ts.into_iter().map(|(w, f)| Term::new(w, f)).collect()).unwrap()
    })
}
