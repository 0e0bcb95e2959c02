//! Rewriting a combination `Σ λᵢ Γ_{uᵢ}` as `Σ μᵢ Γ_{wᵢ}` for the same current
//! such that `G(T) = Σ μᵢ F(wᵢ)`.
//!
//! Two configurations make the column energy smaller than the sum of the jump
//! penalties: cancelling jumps and adjacent jumps (`wᵢ^r(x) = wⱼ^l(x)`). Both are
//! removed by exchanging tails of two graphs at a jump abscissa, which leaves
//! the current untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::currents::{
    cancellations, current_equal, CurrentsError, GraphCombination, Term, EQ_TOL,
};
use crate::lift::{evaluate, LiftError, LiftParams};
use crate::sbv::{ms_energy, SbvError, SbvFunction};

/// Weights closer than this (relative) are treated as equal.
pub const WEIGHT_REL_TOL: f64 = 1e-12;

const MAX_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error(transparent)]
    Sbv(#[from] SbvError),
    #[error(transparent)]
    Currents(#[from] CurrentsError),
    #[error(transparent)]
    Lift(Box<LiftError>),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{stage}: step did not make progress ({before} -> {after})")]
    NoProgress {
        stage: &'static str,
        before: f64,
        after: f64,
    },
    #[error("{0}: step limit reached")]
    StepLimit(&'static str),
    #[error("current changed during {stage}")]
    CurrentChanged { stage: String },
    #[error("weights sum to {parts}, input weights sum to {input}")]
    WeightMismatch { input: f64, parts: f64 },
    #[error("G(T) = {lifted} but the parts carry {parts} (gap {gap})")]
    EnergyGap { lifted: f64, parts: f64, gap: f64 },
}

impl From<LiftError> for DecomposeError {
    fn from(e: LiftError) -> Self {
        DecomposeError::Lift(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Part {
    pub mu: f64,
    pub func: SbvFunction,
}

/// One entry of the provenance log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    /// Alternation of terms `i` and `j` across their cancellation points.
    CancellationSwap {
        i: usize,
        j: usize,
        points: Vec<f64>,
        weight: f64,
        residual: f64,
    },
    Layer {
        index: usize,
        weight: f64,
        members: Vec<usize>,
    },
    /// Tail exchange inside an equal-weight layer; `remaining` is `|𝓘|` after it.
    AdjacencySwap {
        layer: usize,
        x: f64,
        i: usize,
        j: usize,
        remaining: usize,
    },
    /// Tail exchange between parts of different weight, splitting off the excess.
    WeightedSwap {
        x: f64,
        i: usize,
        j: usize,
        weight: f64,
    },
    Coalesce {
        before: usize,
        after: usize,
    },
    Check {
        stage: String,
        current_equal: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub current_equal: bool,
    pub energy_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub parts: Vec<Part>,
    pub provenance: Vec<Step>,
    pub checks: Checks,
    /// `G(T)`.
    pub lifted_energy: f64,
    /// `Σ μᵢ F(wᵢ)`.
    pub parts_energy: f64,
}

impl Decomposition {
    pub fn as_combination(&self) -> Result<GraphCombination, CurrentsError> {
        GraphCombination::new(
            self.parts
                .iter()
                .map(|p| Term::new(p.mu, p.func.clone()))
                .collect(),
        )
    }
}

fn vertical_mass(terms: &[Term]) -> f64 {
    terms
        .iter()
        .map(|t| t.weight * t.func.jump_set().iter().map(|j| j.height()).sum::<f64>())
        .sum()
}

/// `f` up to the first point, then `g`, then `f`, … alternating at each point.
fn alternate(f: &SbvFunction, g: &SbvFunction, points: &[f64]) -> Result<SbvFunction, SbvError> {
    let mut w = f.clone();
    for (k, &p) in points.iter().enumerate() {
        let src = if k % 2 == 0 { g } else { f };
        w = SbvFunction::splice(&w, src, p, EQ_TOL)?;
    }
    Ok(w)
}

/// Removes every cancelling pair by alternating the two graphs across their
/// cancellation points. The heavier weight is split as `λ₁ = λ₂ + (λ₁ − λ₂)`
/// and the excess keeps the original graph.
pub fn remove_cancellation(t: &GraphCombination) -> Result<GraphCombination, DecomposeError> {
    remove_cancellation_logged(t, &mut Vec::new())
}

fn remove_cancellation_logged(
    t: &GraphCombination,
    log: &mut Vec<Step>,
) -> Result<GraphCombination, DecomposeError> {
    let mut current = t.clone();
    for _ in 0..MAX_STEPS {
        let cs = cancellations(&current);
        let Some(first) = cs.first() else {
            return Ok(current);
        };
        let (i, j) = (first.i, first.j);
        let points: Vec<f64> = cs
            .iter()
            .filter(|c| c.i == i && c.j == j)
            .map(|c| c.x)
            .collect();
        let mut terms = current.into_terms();
        let before = vertical_mass(&terms);
        let (h, l) = if terms[i].weight >= terms[j].weight {
            (i, j)
        } else {
            (j, i)
        };
        let heavy = terms[h].clone();
        let lam = terms[l].weight;
        let w1 = alternate(&heavy.func, &terms[l].func, &points)?;
        let w2 = alternate(&terms[l].func, &heavy.func, &points)?;
        let residual = heavy.weight - lam;
        terms[h] = Term::new(lam, w1);
        terms[l] = Term::new(lam, w2);
        let residual = if residual > WEIGHT_REL_TOL * heavy.weight {
            terms.push(Term::new(residual, heavy.func));
            residual
        } else {
            0.0
        };
        let after = vertical_mass(&terms);
        if after >= before {
            return Err(DecomposeError::NoProgress {
                stage: "remove_cancellation",
                before,
                after,
            });
        }
        log.push(Step::CancellationSwap {
            i,
            j,
            points,
            weight: lam,
            residual,
        });
        current = GraphCombination::new(terms)?;
    }
    Err(DecomposeError::StepLimit("remove_cancellation"))
}

/// Equal-weight layers `(λ₍ⱼ₎ − λ₍ⱼ₋₁₎)·(Γ_{u₍ⱼ₎} + … + Γ_{u₍ₖ₎})` over the weights
/// sorted ascending.
pub fn peel_layers(t: &GraphCombination) -> Vec<GraphCombination> {
    layers_with_members(t)
        .into_iter()
        .map(|(layer, _, _)| layer)
        .collect()
}

fn layers_with_members(t: &GraphCombination) -> Vec<(GraphCombination, f64, Vec<usize>)> {
    let terms = t.terms();
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| terms[a].weight.total_cmp(&terms[b].weight));
    let mut out = Vec::new();
    let mut prev = 0.0;
    for (p, &idx) in order.iter().enumerate() {
        let lam = terms[idx].weight;
        if lam - prev <= WEIGHT_REL_TOL * lam {
            continue;
        }
        let members: Vec<usize> = order[p..].to_vec();
        let weight = lam - prev;
        let layer = GraphCombination::new(
            members
                .iter()
                .map(|&m| Term::new(weight, terms[m].func.clone()))
                .collect(),
        )
        .expect("positive weights on a shared interval");
        out.push((layer, weight, members));
        prev = lam;
    }
    out
}

/// Ordered pairs `(i, j)`, `i ≠ j`, both jumping at `x` with `wᵢ^r(x) = wⱼ^l(x)`.
fn adjacency_pairs(fs: &[&SbvFunction], x: f64) -> Vec<(usize, usize)> {
    let jumps: Vec<_> = fs.iter().map(|f| f.jump_at(x, EQ_TOL)).collect();
    let mut out = Vec::new();
    for (i, ji) in jumps.iter().enumerate() {
        let Some(ji) = ji else { continue };
        for (j, jj) in jumps.iter().enumerate() {
            if let (true, Some(jj)) = (i != j, jj) {
                if (ji.right - jj.left).abs() <= EQ_TOL {
                    out.push((i, j));
                }
            }
        }
    }
    out
}

fn exchange_tails(
    fi: &SbvFunction,
    fj: &SbvFunction,
    x: f64,
) -> Result<(SbvFunction, SbvFunction), SbvError> {
    Ok((
        SbvFunction::splice(fi, fj, x, EQ_TOL)?,
        SbvFunction::splice(fj, fi, x, EQ_TOL)?,
    ))
}

/// Removes adjacency from an equal-weight, cancellation-free combination.
/// For the first adjacent pair `(i, j)` at `p`, `wᵢ` keeps `uᵢ` before `p` and
/// takes `uⱼ` after it, `wⱼ` the converse, which makes `wⱼ` continuous at `p`.
pub fn swap_adjacent_block(t: &GraphCombination) -> Result<GraphCombination, DecomposeError> {
    swap_block_logged(t, 0, &mut Vec::new())
}

fn swap_block_logged(
    t: &GraphCombination,
    layer: usize,
    log: &mut Vec<Step>,
) -> Result<GraphCombination, DecomposeError> {
    let Some(w0) = t.terms().first().map(|term| term.weight) else {
        return Ok(t.clone());
    };
    if let Some(k) = t
        .terms()
        .iter()
        .position(|term| (term.weight - w0).abs() > WEIGHT_REL_TOL * w0.max(term.weight))
    {
        return Err(DecomposeError::Precondition(format!(
            "term {k} has weight {} but term 0 has {w0}",
            t.terms()[k].weight
        )));
    }
    if let Some(c) = cancellations(t).first() {
        return Err(DecomposeError::Precondition(format!(
            "terms {} and {} cancel at x = {}",
            c.i, c.j, c.x
        )));
    }
    let mut fs: Vec<SbvFunction> = t.terms().iter().map(|term| term.func.clone()).collect();
    for x in t.jump_columns() {
        let mut pairs = adjacency_pairs(&fs.iter().collect::<Vec<_>>(), x);
        let mut steps = 0;
        while let Some(&(i, j)) = pairs.first() {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(DecomposeError::StepLimit("swap_adjacent_block"));
            }
            let (wi, wj) = exchange_tails(&fs[i], &fs[j], x)?;
            fs[i] = wi;
            fs[j] = wj;
            let next = adjacency_pairs(&fs.iter().collect::<Vec<_>>(), x);
            if next.len() >= pairs.len() {
                return Err(DecomposeError::NoProgress {
                    stage: "swap_adjacent_block",
                    before: pairs.len() as f64,
                    after: next.len() as f64,
                });
            }
            log.push(Step::AdjacencySwap {
                layer,
                x,
                i,
                j,
                remaining: next.len(),
            });
            pairs = next;
        }
    }
    Ok(GraphCombination::new(
        fs.into_iter().map(|f| Term::new(w0, f)).collect(),
    )?)
}

fn jump_weight_at(terms: &[Term], x: f64) -> f64 {
    terms
        .iter()
        .filter(|t| t.func.jump_at(x, EQ_TOL).is_some())
        .map(|t| t.weight)
        .sum()
}

/// Adjacency between parts of different layers. For weights `a`, `b` and
/// `m = min(a, b)` the pair becomes `m·Γ_{wᵢ} + m·Γ_{wⱼ}` after the tail
/// exchange, plus the excess of the heavier part unchanged. The weight of
/// parts jumping at `x` drops by `m` each time.
fn resolve_weighted_adjacency(
    terms: Vec<Term>,
    log: &mut Vec<Step>,
) -> Result<Vec<Term>, DecomposeError> {
    let mut terms = terms;
    let columns = GraphCombination::new(terms.clone())?.jump_columns();
    for x in columns {
        for steps in 0.. {
            if steps > MAX_STEPS {
                return Err(DecomposeError::StepLimit("weighted adjacency"));
            }
            let pairs = adjacency_pairs(&terms.iter().map(|t| &t.func).collect::<Vec<_>>(), x);
            let Some(&(i, j)) = pairs.first() else { break };
            let before = jump_weight_at(&terms, x);
            let (a, b) = (terms[i].clone(), terms[j].clone());
            let m = a.weight.min(b.weight);
            let (wi, wj) = exchange_tails(&a.func, &b.func, x)?;
            terms[i] = Term::new(m, wi);
            terms[j] = Term::new(m, wj);
            for orig in [a, b] {
                if orig.weight - m > WEIGHT_REL_TOL * orig.weight {
                    terms.push(Term::new(orig.weight - m, orig.func));
                }
            }
            let after = jump_weight_at(&terms, x);
            if after >= before {
                return Err(DecomposeError::NoProgress {
                    stage: "weighted adjacency",
                    before,
                    after,
                });
            }
            log.push(Step::WeightedSwap { x, i, j, weight: m });
        }
    }
    Ok(terms)
}

fn check_stage(
    before: &GraphCombination,
    after: &GraphCombination,
    stage: String,
    log: &mut Vec<Step>,
) -> Result<(), DecomposeError> {
    if !current_equal(before, after, EQ_TOL) {
        return Err(DecomposeError::CurrentChanged { stage });
    }
    log.push(Step::Check {
        stage,
        current_equal: true,
    });
    Ok(())
}

/// Full decomposition with verification of current equality after every stage,
/// weight conservation and `G(T) = Σ μᵢ F(wᵢ)`.
pub fn decompose(
    t: &GraphCombination,
    params: &LiftParams,
) -> Result<Decomposition, DecomposeError> {
    let lifted = evaluate(t, params)?.total;
    let mut log = Vec::new();

    let clean = remove_cancellation_logged(t, &mut log)?;
    check_stage(t, &clean, "remove_cancellation".into(), &mut log)?;

    let mut terms: Vec<Term> = Vec::new();
    for (k, (layer, weight, members)) in layers_with_members(&clean).into_iter().enumerate() {
        log.push(Step::Layer {
            index: k,
            weight,
            members,
        });
        let swapped = swap_block_logged(&layer, k, &mut log)?;
        check_stage(&layer, &swapped, format!("layer {k}"), &mut log)?;
        terms.extend(swapped.into_terms());
    }

    let terms = resolve_weighted_adjacency(terms, &mut log)?;
    let before = terms.len();
    let out = GraphCombination::new(terms)?.coalesced();
    log.push(Step::Coalesce {
        before,
        after: out.len(),
    });
    check_stage(t, &out, "result".into(), &mut log)?;

    let input = t.total_weight();
    let total = out.total_weight();
    if (total - input).abs() > WEIGHT_REL_TOL * input.max(1.0) * 8.0 {
        return Err(DecomposeError::WeightMismatch {
            input,
            parts: total,
        });
    }

    let mut parts_energy = 0.0;
    for term in out.terms() {
        parts_energy += term.weight * ms_energy(&term.func, &params.g, &params.ms)?;
    }
    let gap = (lifted - parts_energy).abs();
    if gap > 1e-8 * (1.0 + lifted) {
        return Err(DecomposeError::EnergyGap {
            lifted,
            parts: parts_energy,
            gap,
        });
    }
    Ok(Decomposition {
        parts: out
            .into_terms()
            .into_iter()
            .map(|t| Part {
                mu: t.weight,
                func: t.func,
            })
            .collect(),
        provenance: log,
        checks: Checks {
            current_equal: true,
            energy_gap: gap,
        },
        lifted_energy: lifted,
        parts_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbv::{Interval, Piece};

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
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

    fn comb(terms: &[(f64, SbvFunction)]) -> GraphCombination {
        GraphCombination::new(
            terms
                .iter()
                .map(|(w, f)| Term::new(*w, f.clone()))
                .collect(),
        )
        .unwrap()
    }

    fn params() -> LiftParams {
        LiftParams::new(1.0, 0.0, SbvFunction::constant(unit(), 0.0)).unwrap()
    }

    #[test]
    fn clean_input_is_unchanged() {
        let t = comb(&[(1.0, step(0.0, 1.0)), (2.0, step(3.0, 5.0))]);
        assert_eq!(remove_cancellation(&t).unwrap(), t);
    }

    #[test]
    fn opposite_jumps_become_continuous() {
        let t = comb(&[(1.0, step(0.0, 2.0)), (1.0, step(2.0, 0.0))]);
        let r = remove_cancellation(&t).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.terms().iter().all(|term| term.func.jump_count() == 0));
        assert!(current_equal(&t, &r, EQ_TOL));
    }

    #[test]
    fn heavier_term_leaves_a_residual() {
        let u1 = step(0.0, 2.0);
        let t = comb(&[(2.0, u1.clone()), (1.0, step(2.0, 0.0))]);
        let r = remove_cancellation(&t).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.terms()[..2].iter().all(|term| term.weight == 1.0));
        assert_eq!(r.terms()[2], Term::new(1.0, u1));
        assert!(current_equal(&t, &r, EQ_TOL));
    }

    #[test]
    fn cancelling_pair_count_may_stall_while_mass_drops() {
        let t = comb(&[
            (1.0, step(0.0, 3.0)),
            (1.0, step(4.0, 2.0)),
            (1.0, step(2.5, 1.0)),
        ]);
        assert_eq!(cancellations(&t).len(), 1);
        let mut log = Vec::new();
        let r = remove_cancellation_logged(&t, &mut log).unwrap();
        assert_eq!(log.len(), 2);
        assert!(cancellations(&r).is_empty());
        assert!(current_equal(&t, &r, EQ_TOL));
    }

    #[test]
    fn peel_equal_weights() {
        let t = comb(&[(1.0, step(0.0, 1.0)), (1.0, step(0.0, 2.0))]);
        assert_eq!(peel_layers(&t), vec![t]);
    }

    #[test]
    fn peel_two_one() {
        let (u1, u2) = (step(0.0, 1.0), step(5.0, 6.0));
        let layers = peel_layers(&comb(&[(2.0, u1.clone()), (1.0, u2.clone())]));
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0], comb(&[(1.0, u2), (1.0, u1.clone())]));
        assert_eq!(layers[1], comb(&[(1.0, u1)]));
    }

    #[test]
    fn peel_three_three_one() {
        let fs = [step(0.0, 1.0), step(2.0, 3.0), step(4.0, 5.0)];
        let layers = peel_layers(&comb(&[
            (3.0, fs[0].clone()),
            (3.0, fs[1].clone()),
            (1.0, fs[2].clone()),
        ]));
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].len(), 3);
        assert!(layers[0].terms().iter().all(|t| t.weight == 1.0));
        assert_eq!(
            layers[1],
            comb(&[(2.0, fs[0].clone()), (2.0, fs[1].clone())])
        );
    }

    #[test]
    fn stacked_jumps_follow_the_splice_formula() {
        // u₁ jumps (2,3), u₂ jumps (3,4): w₁ takes u₂'s tail and jumps (2,4).
        let t = comb(&[(1.0, step(2.0, 3.0)), (1.0, step(3.0, 4.0))]);
        let s = swap_adjacent_block(&t).unwrap();
        let j = s.terms()[0].func.jump_set();
        assert_eq!((j.len(), j[0].left, j[0].right), (1, 2.0, 4.0));
        assert_eq!(s.terms()[1].func.jump_count(), 0);
        assert!(s.terms()[1]
            .func
            .approx_eq(&SbvFunction::constant(unit(), 3.0), 0.0));
        assert!(current_equal(&t, &s, EQ_TOL));
    }

    #[test]
    fn unequal_weights_violate_the_block_precondition() {
        let t = comb(&[(1.0, step(2.0, 3.0)), (2.0, step(3.0, 4.0))]);
        assert!(matches!(
            swap_adjacent_block(&t),
            Err(DecomposeError::Precondition(_))
        ));
    }

    #[test]
    fn chain_of_three_resolves() {
        let t = comb(&[
            (1.0, step(0.0, 1.0)),
            (1.0, step(1.0, 2.0)),
            (1.0, step(2.0, 3.0)),
        ]);
        let s = swap_adjacent_block(&t).unwrap();
        let jumps: usize = s.terms().iter().map(|t| t.func.jump_count()).sum();
        assert_eq!(jumps, 1);
        assert!(current_equal(&t, &s, EQ_TOL));
    }

    #[test]
    fn coarea_pair_decomposes_into_jump_and_ramp() {
        let u1 = SbvFunction::new(
            unit(),
            vec![
                Piece::linear(0.0, 0.5, 0.0, 0.0),
                Piece::linear(0.5, 1.0, 0.5, 1.0),
            ],
        )
        .unwrap();
        let u2 = SbvFunction::new(
            unit(),
            vec![
                Piece::linear(0.0, 0.5, 0.0, 0.5),
                Piece::linear(0.5, 1.0, 1.0, 1.0),
            ],
        )
        .unwrap();
        let d = decompose(&comb(&[(0.5, u1), (0.5, u2)]), &params()).unwrap();
        assert_eq!(d.parts.len(), 2);
        assert!(d.parts[0].func.approx_eq(&step(0.0, 1.0), 1e-12));
        assert!(d.parts[1]
            .func
            .approx_eq(&SbvFunction::linear(unit(), 0.0, 1.0), 1e-12));
        assert!((d.lifted_energy - 1.0).abs() < 1e-12);
        assert!(d.checks.energy_gap < 1e-12);
    }

    #[test]
    fn adjacency_across_layers_needs_weight_splitting() {
        // Profile at ½ is 1 on (0,½), 2 on (½,2): G's column part is 2, while
        // the layered swap alone would leave three jump units.
        let t = comb(&[
            (1.0, step(0.0, 1.0)),
            (1.0, step(0.5, 1.0)),
            (2.0, step(1.0, 2.0)),
        ]);
        let d = decompose(&t, &params()).unwrap();
        assert!((d.lifted_energy - 2.0).abs() < 1e-12);
        assert!((d.parts_energy - 2.0).abs() < 1e-12);
        assert!(d
            .provenance
            .iter()
            .any(|s| matches!(s, Step::WeightedSwap { .. })));
    }

    #[test]
    fn single_graph_is_its_own_decomposition() {
        let t = comb(&[(0.7, step(0.0, 1.0))]);
        let d = decompose(&t, &params()).unwrap();
        assert_eq!(
            d.parts,
            vec![Part {
                mu: 0.7,
                func: step(0.0, 1.0)
            }]
        );
    }

    #[test]
    fn json_shape() {
        let d = decompose(&comb(&[(1.0, step(0.0, 1.0))]), &params()).unwrap();
        let v = serde_json::to_value(&d).unwrap();
        assert!(v["parts"][0].get("mu").is_some());
        assert!(v["parts"][0].get("func").is_some());
        assert!(v["provenance"].is_array());
        assert_eq!(v["checks"]["current_equal"], true);
        assert!(v["checks"]["energy_gap"].is_number());
    }
}
