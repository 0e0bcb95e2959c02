//! Finite weighted sums of extended graphs `T = Σ λᵢ Γ_{uᵢ}` with `λᵢ > 0`.
//!
//! Two operations expose the current behind a representation: the signed
//! multiplicity profile on a vertical line (`slice_profile`), and a canonical
//! branch form away from the jump columns (`branch_form`). Together they decide
//! equality of currents whose graph representations differ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sbv::{Domain, Interval, Jump, SbvError, SbvFunction, Segment};

/// Absolute tolerance for abscissae, trace values, levels and weights.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurrentsError {
    #[error("term {term}: weight must be finite and > 0, got {weight}")]
    BadWeight { term: usize, weight: f64 },
    #[error("term {term} lives on a different interval than term 0")]
    DomainMismatch { term: usize },
    #[error("abscissa {x} is not inside the open interval ({a}, {b})")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Sbv(#[from] SbvError),
}

/// One weighted graph of a combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub weight: f64,
    pub func: SbvFunction,
}

impl Term {
    pub fn new(weight: f64, func: SbvFunction) -> Self {
        Self { weight, func }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCombination {
    terms: Vec<Term>,
}

/// An element of the cone of positive combinations of SBV graphs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawCombination", into = "RawCombination")]
pub struct GraphCombination {
    terms: Vec<Term>,
}

impl TryFrom<RawCombination> for GraphCombination {
    type Error = CurrentsError;
    fn try_from(raw: RawCombination) -> Result<Self, Self::Error> {
        GraphCombination::new(raw.terms)
    }
}

impl From<GraphCombination> for RawCombination {
    fn from(t: GraphCombination) -> Self {
        RawCombination { terms: t.terms }
    }
}

impl GraphCombination {
    pub fn new(terms: Vec<Term>) -> Result<Self, CurrentsError> {
        for (k, t) in terms.iter().enumerate() {
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return Err(CurrentsError::BadWeight {
                    term: k,
                    weight: t.weight,
                });
            }
            if k > 0 && !t.func.interval().same_as(&terms[0].func.interval()) {
                return Err(CurrentsError::DomainMismatch { term: k });
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn single(weight: f64, func: SbvFunction) -> Result<Self, CurrentsError> {
        Self::new(vec![Term::new(weight, func)])
    }

    pub fn graph(func: SbvFunction) -> Self {
        Self {
            terms: vec![Term::new(1.0, func)],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<Term> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn interval(&self) -> Option<Interval> {
        self.terms.first().map(|t| t.func.interval())
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// `self + other` as a representation (terms concatenated).
    pub fn plus(&self, other: &GraphCombination) -> Result<Self, CurrentsError> {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms)
    }

    /// `c · self` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, CurrentsError> {
        Self::new(
            self.terms
                .iter()
                .map(|t| Term::new(c * t.weight, t.func.clone()))
                .collect(),
        )
    }

    /// Merges terms whose functions coincide, summing their weights.
    pub fn coalesced(&self) -> Self {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match out.iter_mut().find(|o| o.func.approx_eq(&t.func, 0.0)) {
                Some(o) => o.weight += t.weight,
                None => out.push(t.clone()),
            }
        }
        Self { terms: out }
    }

    /// `S_T`: the union of the jump sets, sorted, with abscissae closer than
    /// [`EQ_TOL`] identified.
    pub fn jump_columns(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| t.func.jump_set().into_iter().map(|j| j.x))
            .collect();
        xs.sort_by(f64::total_cmp);
        dedup_tol(&mut xs, EQ_TOL);
        xs
    }
}

fn dedup_tol(xs: &mut Vec<f64>, tol: f64) {
    xs.dedup_by(|b, a| (*b - *a).abs() <= tol);
}

/// The overlapping value interval when two jumps at the same abscissa cancel:
/// one rises through the bottom of a descent whose top it does not exceed,
/// `a^l ≤ b^r < a^r ≤ b^l`, or the mirrored pattern `a^r ≤ b^l < a^l ≤ b^r`.
/// Both orders of the pair are tried.
pub fn cancellation_overlap(a: &Jump, b: &Jump, tol: f64) -> Option<(f64, f64)> {
    let pattern = |p: &Jump, q: &Jump| {
        if p.left <= q.right + tol && q.right < p.right - tol && p.right <= q.left + tol {
            Some((q.right, p.right))
        } else if p.right <= q.left + tol && q.left < p.left - tol && p.left <= q.right + tol {
            Some((q.left, p.left))
        } else {
            None
        }
    };
    pattern(a, b).or_else(|| pattern(b, a))
}

/// A cancelling pair of terms `(i, j)` at abscissa `x` with the overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cancellation {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub overlap: (f64, f64),
}

/// Every cancelling pair `i < j` of `t`, ordered by `(i, j, x)`.
pub fn cancellations(t: &GraphCombination) -> Vec<Cancellation> {
    let jumps: Vec<Vec<Jump>> = t.terms.iter().map(|term| term.func.jump_set()).collect();
    let mut out = Vec::new();
    for i in 0..jumps.len() {
        for j in i + 1..jumps.len() {
            for a in &jumps[i] {
                let Some(b) = jumps[j].iter().find(|b| (b.x - a.x).abs() <= EQ_TOL) else {
                    continue;
                };
                if let Some(overlap) = cancellation_overlap(a, b, EQ_TOL) {
                    out.push(Cancellation {
                        i,
                        j,
                        x: a.x,
                        overlap,
                    });
                }
            }
        }
    }
    out
}

/// Signed multiplicity of a current on the vertical line `{x} × ℝ`.
///
/// Level `levels[i]` holds on `(breakpoints[i], breakpoints[i+1])` and zero
/// outside. An up-jump of weight `λ` adds `+λ` on `(u^l, u^r)`, a down-jump
/// adds `-λ` on `(u^r, u^l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub x: f64,
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

impl ColumnProfile {
    pub fn empty(x: f64) -> Self {
        Self {
            x,
            breakpoints: Vec::new(),
            levels: Vec::new(),
        }
    }

    /// Validated merged profile: strictly increasing breakpoints, one more than
    /// levels, adjacent levels distinct and nonzero end levels.
    pub fn new(x: f64, breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self, CurrentsError> {
        if levels.is_empty() && breakpoints.is_empty() {
            return Ok(Self::empty(x));
        }
        if breakpoints.len() != levels.len() + 1 {
            return Err(CurrentsError::InvalidProfile(format!(
                "{} breakpoints for {} levels",
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(CurrentsError::InvalidProfile("non-finite entry".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CurrentsError::InvalidProfile(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CurrentsError::InvalidProfile(
                "adjacent levels must differ".into(),
            ));
        }
        if levels[0] == 0.0 || *levels.last().unwrap() == 0.0 {
            return Err(CurrentsError::InvalidProfile(
                "end levels must be nonzero".into(),
            ));
        }
        Ok(Self {
            x,
            breakpoints,
            levels,
        })
    }

    /// Builds the merged profile from `(t, Δ)` increments of the level function.
    pub fn from_increments(x: f64, mut incs: Vec<(f64, f64)>, tol: f64) -> Self {
        incs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (t, d) in incs {
            match points.last_mut() {
                Some(last) if (t - last.0).abs() <= tol => last.1 += d,
                _ => points.push((t, d)),
            }
        }
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        let mut level = 0.0;
        for w in points.windows(2) {
            level += w[0].1;
            match levels.last() {
                Some(&prev) if (prev - level).abs() <= tol => {
                    *breakpoints.last_mut().unwrap() = w[1].0;
                }
                _ => {
                    if breakpoints.is_empty() {
                        breakpoints.push(w[0].0);
                    }
                    levels.push(level);
                    breakpoints.push(w[1].0);
                }
            }
        }
        let first = levels.iter().position(|l| l.abs() > tol);
        let last = levels.iter().rposition(|l| l.abs() > tol);
        match (first, last) {
            (Some(i), Some(j)) => Self {
                x,
                breakpoints: breakpoints[i..=j + 1].to_vec(),
                levels: levels[i..=j].to_vec(),
            },
            _ => Self::empty(x),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    /// `(lo, hi, level)` for each interval.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .map(|(k, &l)| (self.breakpoints[k], self.breakpoints[k + 1], l))
    }

    pub fn level_at(&self, t: f64) -> f64 {
        self.intervals()
            .find(|&(lo, hi, _)| t > lo && t < hi)
            .map_or(0.0, |(_, _, l)| l)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            x: self.x,
            breakpoints: self.breakpoints.clone(),
            levels: self.levels.iter().map(|l| c * l).collect(),
        }
    }

    /// Pointwise sum of two profiles on the same column, merged.
    pub fn sum(&self, other: &ColumnProfile, tol: f64) -> Self {
        let mut incs = self.increments();
        incs.extend(other.increments());
        Self::from_increments(self.x, incs, tol)
    }

    fn increments(&self) -> Vec<(f64, f64)> {
        let mut incs = Vec::with_capacity(self.breakpoints.len());
        let mut prev = 0.0;
        for (k, &t) in self.breakpoints.iter().enumerate() {
            let l = self.levels.get(k).copied().unwrap_or(0.0);
            incs.push((t, l - prev));
            prev = l;
        }
        incs
    }

    pub fn approx_eq(&self, other: &ColumnProfile, tol: f64) -> bool {
        self.levels.len() == other.levels.len()
            && self
                .breakpoints
                .iter()
                .zip(&other.breakpoints)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .levels
                .iter()
                .zip(&other.levels)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// CSV rows `x,a_i,a_{i+1},level`.
    pub fn csv_rows(&self) -> Vec<String> {
        self.intervals()
            .map(|(lo, hi, l)| format!("{},{},{},{}", self.x, lo, hi, l))
            .collect()
    }
}

/// The multiplicity profile of `t` on the column `{x} × ℝ`.
pub fn slice_profile(t: &GraphCombination, x: f64) -> Result<ColumnProfile, CurrentsError> {
    let Some(iv) = t.interval() else {
        return Ok(ColumnProfile::empty(x));
    };
    if !iv.contains_open(x) {
        return Err(CurrentsError::OutOfDomain {
            x,
            a: iv.a,
            b: iv.b,
        });
    }
    let mut incs = Vec::new();
    for term in &t.terms {
        if let Some(j) = term.func.jump_at(x, EQ_TOL) {
            incs.push((j.left, term.weight));
            incs.push((j.right, -term.weight));
        }
    }
    Ok(ColumnProfile::from_increments(x, incs, EQ_TOL))
}

/// A linear branch of the current inside a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub v0: f64,
    pub v1: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub branches: Vec<Branch>,
}

impl Cell {
    fn slope(&self, b: &Branch) -> f64 {
        (b.v1 - b.v0) / (self.x1 - self.x0)
    }
}

/// Canonical description of a current away from its jump columns: maximal
/// cells on which every branch is linear, each branch with its total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchForm {
    pub cells: Vec<Cell>,
}

impl BranchForm {
    pub fn approx_eq(&self, other: &BranchForm, tol: f64) -> bool {
        self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(c, d)| {
                (c.x0 - d.x0).abs() <= tol
                    && (c.x1 - d.x1).abs() <= tol
                    && same_branches(&c.branches, &d.branches, tol)
            })
    }
}

fn same_branches(a: &[Branch], b: &[Branch], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|p| {
        let hit = b.iter().enumerate().position(|(k, q)| {
            !used[k]
                && (p.v0 - q.v0).abs() <= tol
                && (p.v1 - q.v1).abs() <= tol
                && (p.weight - q.weight).abs() <= tol
        });
        match hit {
            Some(k) => {
                used[k] = true;
                true
            }
            None => false,
        }
    })
}

/// Canonical branch form of `t` over its whole interval.
pub fn branch_form(t: &GraphCombination) -> BranchForm {
    match t.interval() {
        Some(iv) => branch_form_on(t, iv.a, iv.b),
        None => BranchForm { cells: Vec::new() },
    }
}

/// Canonical branch form of `t` restricted to `[lo, hi]`.
pub fn branch_form_on(t: &GraphCombination, lo: f64, hi: f64) -> BranchForm {
    let mut xs: Vec<f64> = vec![lo, hi];
    for term in &t.terms {
        xs.extend(
            term.func
                .breakpoints()
                .into_iter()
                .filter(|&x| x > lo && x < hi),
        );
    }
    xs.sort_by(f64::total_cmp);
    dedup_tol(&mut xs, EQ_TOL);
    if let Some(last) = xs.last_mut() {
        *last = hi;
    }
    let segs: Vec<Vec<Segment>> = t
        .terms
        .iter()
        .map(|term| term.func.segments().collect())
        .collect();

    let mut cells: Vec<Cell> = Vec::with_capacity(xs.len().saturating_sub(1));
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let mut branches: Vec<Branch> = Vec::new();
        for (term, ss) in t.terms.iter().zip(&segs) {
            let k = ss.partition_point(|s| s.x1 < mid).min(ss.len() - 1);
            let s = ss[k];
            let (v0, v1) = (s.at(x0), s.at(x1));
            match branches
                .iter_mut()
                .find(|b| (b.v0 - v0).abs() <= EQ_TOL && (b.v1 - v1).abs() <= EQ_TOL)
            {
                Some(b) => b.weight += term.weight,
                None => branches.push(Branch {
                    v0,
                    v1,
                    weight: term.weight,
                }),
            }
        }
        branches.sort_by(|a, b| a.v0.total_cmp(&b.v0).then(a.v1.total_cmp(&b.v1)));
        let cell = Cell { x0, x1, branches };
        match cells.last_mut() {
            Some(prev) if continues(prev, &cell) => {
                let mut right = cell.branches.clone();
                let mut left = prev.branches.clone();
                sort_at_joint(prev, &mut left, true);
                sort_at_joint(&cell, &mut right, false);
                let merged: Vec<Branch> = left
                    .iter()
                    .zip(&right)
                    .map(|(l, r)| Branch {
                        v0: l.v0,
                        v1: r.v1,
                        weight: l.weight,
                    })
                    .collect();
                prev.x1 = x1;
                prev.branches = merged;
                prev.branches
                    .sort_by(|a, b| a.v0.total_cmp(&b.v0).then(a.v1.total_cmp(&b.v1)));
            }
            _ => cells.push(cell),
        }
    }
    BranchForm { cells }
}

fn sort_at_joint(cell: &Cell, bs: &mut [Branch], at_right_end: bool) {
    bs.sort_by(|a, b| {
        let (va, vb) = if at_right_end {
            (a.v1, b.v1)
        } else {
            (a.v0, b.v0)
        };
        va.total_cmp(&vb)
            .then(cell.slope(a).total_cmp(&cell.slope(b)))
            .then(a.weight.total_cmp(&b.weight))
    });
}

/// Whether every branch of `left` continues collinearly into `right` with the
/// same weight, so the shared abscissa is not a feature of the current.
fn continues(left: &Cell, right: &Cell) -> bool {
    if left.branches.len() != right.branches.len() {
        return false;
    }
    let mut l = left.branches.clone();
    let mut r = right.branches.clone();
    sort_at_joint(left, &mut l, true);
    sort_at_joint(right, &mut r, false);
    l.iter().zip(&r).all(|(a, b)| {
        let (sa, sb) = (left.slope(a), right.slope(b));
        (a.v1 - b.v0).abs() <= EQ_TOL
            && (sa - sb).abs() <= EQ_TOL * (1.0 + sa.abs().max(sb.abs()))
            && (a.weight - b.weight).abs() <= EQ_TOL
    })
}

/// Equality of the currents represented by `t1` and `t2`.
pub fn current_equal(t1: &GraphCombination, t2: &GraphCombination, tol: f64) -> bool {
    match (t1.interval(), t2.interval()) {
        (None, None) => return true,
        (Some(a), Some(b)) if !a.same_as(&b) => return false,
        _ => {}
    }
    if !branch_form(t1).approx_eq(&branch_form(t2), tol) {
        return false;
    }
    let mut xs = t1.jump_columns();
    xs.extend(t2.jump_columns());
    xs.sort_by(f64::total_cmp);
    dedup_tol(&mut xs, EQ_TOL);
    xs.into_iter()
        .all(|x| match (slice_profile(t1, x), slice_profile(t2, x)) {
            (Ok(p), Ok(q)) => p.approx_eq(&q, tol),
            _ => false,
        })
}

/// Total weighted length `Σ λᵢ (∫√(1+(uᵢ')²) + Σ |uᵢ^r - uᵢ^l|)`.
pub fn mass(t: &GraphCombination) -> f64 {
    t.terms
        .iter()
        .map(|term| {
            let graph: f64 = term
                .func
                .segments()
                .map(|s| s.width().hypot(s.v1 - s.v0))
                .sum();
            let vertical: f64 = term.func.jump_set().iter().map(|j| j.height()).sum();
            term.weight * (graph + vertical)
        })
        .sum()
}

/// The current restricted to `(I ∖ I') × ℝ`: branch forms on both collars and
/// the vertical multiplicity on the two boundary columns of `I'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutsideRestriction {
    pub left: BranchForm,
    pub right: BranchForm,
    pub inner_a_profile: ColumnProfile,
    pub inner_b_profile: ColumnProfile,
}

impl OutsideRestriction {
    pub fn approx_eq(&self, other: &OutsideRestriction, tol: f64) -> bool {
        self.left.approx_eq(&other.left, tol)
            && self.right.approx_eq(&other.right, tol)
            && self.inner_a_profile.approx_eq(&other.inner_a_profile, tol)
            && self.inner_b_profile.approx_eq(&other.inner_b_profile, tol)
    }
}

pub fn restrict_outside(
    t: &GraphCombination,
    d: &Domain,
) -> Result<OutsideRestriction, CurrentsError> {
    if let Some(iv) = t.interval() {
        if !iv.same_as(&d.interval()) {
            return Err(SbvError::DomainMismatch {
                left: iv,
                right: d.interval(),
            }
            .into());
        }
    }
    Ok(OutsideRestriction {
        left: branch_form_on(t, d.a, d.inner_a),
        right: branch_form_on(t, d.inner_b, d.b),
        inner_a_profile: slice_profile(t, d.inner_a)?,
        inner_b_profile: slice_profile(t, d.inner_b)?,
    })
}
