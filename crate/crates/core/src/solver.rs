//! Exact discrete minimizers of `F` over piecewise-linear functions on a grid
//! that may jump at interior grid nodes, and random competitor generation.
//!
//! Every segment between consecutive cuts carries its own nodal values, so a
//! segment's best energy is a tridiagonal solve and the optimal cut set is a
//! shortest path over cut positions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::currents::{GraphCombination, Term};
use crate::sbv::{
    ms_energy, Domain, Interval, Measurement, MsParams, Piece, SbvError, SbvFunction,
};

/// Largest grid accepted by [`brute_force_minimize`].
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

/// Relative tolerance under which two candidate costs tie.
const COST_TIE_REL: f64 = 1e-12;

/// Default number of grid nodes across the inner interval for competitors.
pub const DEFAULT_COMPETITOR_NODES: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Sbv(#[from] SbvError),
    #[error("grid needs at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("brute force accepts at most {max} nodes, got {n}")]
    SizeLimit { n: usize, max: usize },
    #[error("measurement lives on ({ga}, {gb}) but the problem is posed on ({a}, {b})")]
    DomainMismatch { ga: f64, gb: f64, a: f64, b: f64 },
    #[error("invalid boundary data: {0}")]
    InvalidBoundary(String),
    #[error("singular segment system on nodes {start}..={end}")]
    Singular { start: usize, end: usize },
}

/// Boundary data for a Dirichlet problem: `u` is fixed on `[a, inner_a]` and
/// on `[inner_b, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DirichletSpec {
    domain: Domain,
    left: SbvFunction,
    right: SbvFunction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    domain: Interval,
    inner: Interval,
    left: Vec<Piece>,
    right: Vec<Piece>,
}

impl TryFrom<RawSpec> for DirichletSpec {
    type Error = SolverError;
    fn try_from(r: RawSpec) -> Result<Self, Self::Error> {
        let d = Domain::new(r.domain.a, r.domain.b, r.inner.a, r.inner.b)?;
        DirichletSpec::new(d, r.left, r.right)
    }
}

impl From<DirichletSpec> for RawSpec {
    fn from(s: DirichletSpec) -> Self {
        RawSpec {
            domain: s.domain.interval(),
            inner: s.domain.inner(),
            left: s.left.into_pieces(),
            right: s.right.into_pieces(),
        }
    }
}

impl DirichletSpec {
    /// `left` must cover exactly `[a, inner_a]` and `right` exactly `[inner_b, b]`.
    pub fn new(domain: Domain, left: Vec<Piece>, right: Vec<Piece>) -> Result<Self, SolverError> {
        let li = Interval::new(domain.a, domain.inner_a)?;
        let ri = Interval::new(domain.inner_b, domain.b)?;
        let left = SbvFunction::new(li, left)
            .map_err(|e| SolverError::InvalidBoundary(format!("left collar: {e}")))?;
        let right = SbvFunction::new(ri, right)
            .map_err(|e| SolverError::InvalidBoundary(format!("right collar: {e}")))?;
        Ok(Self {
            domain,
            left,
            right,
        })
    }

    /// The boundary data of `u` on the two collars.
    pub fn from_function(u: &SbvFunction, domain: Domain) -> Result<Self, SolverError> {
        Self::new(
            domain,
            u.clip(domain.a, domain.inner_a),
            u.clip(domain.inner_b, domain.b),
        )
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn left(&self) -> &SbvFunction {
        &self.left
    }

    pub fn right(&self) -> &SbvFunction {
        &self.right
    }

    /// Value the inner part must take at `inner_a`.
    pub fn left_trace(&self) -> f64 {
        self.left.pieces().last().unwrap().last_value()
    }

    /// Value the inner part must take at `inner_b`.
    pub fn right_trace(&self) -> f64 {
        self.right.pieces()[0].first_value()
    }

    /// Glues inner pieces covering `[inner_a, inner_b]` between the collars.
    pub fn extend(&self, inner: Vec<Piece>) -> Result<SbvFunction, SbvError> {
        let mut pieces = self.left.pieces().to_vec();
        pieces.extend(inner);
        pieces.extend(self.right.pieces().iter().cloned());
        SbvFunction::new(self.domain.interval(), pieces)
    }
}

/// Grid used by the solver: `n` uniform nodes over `I`, or over `I'` when
/// boundary data is given.
pub fn solver_grid(g: &Measurement, spec: Option<&DirichletSpec>, n: usize) -> Vec<f64> {
    let (lo, hi) = match spec {
        Some(s) => (s.domain.inner_a, s.domain.inner_b),
        None => (g.interval().a, g.interval().b),
    };
    uniform(lo, hi, n)
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    xs[n - 1] = hi;
    xs
}

/// Exact per-cell integrals of `g` against the two hat halves and of `g²`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    h: f64,
    /// `∫ g (1 − s)` with `s` the local coordinate in `[0, 1]`.
    p: f64,
    /// `∫ g s`.
    q: f64,
    g2: f64,
}

fn cells(grid: &[f64], g: &Measurement) -> Vec<Cell> {
    let segs: Vec<_> = g.segments().collect();
    let mut out = Vec::with_capacity(grid.len() - 1);
    let mut k = 0;
    for w in grid.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let h = x1 - x0;
        let (mut p, mut q, mut g2) = (0.0, 0.0, 0.0);
        while k + 1 < segs.len() && segs[k].x1 <= x0 {
            k += 1;
        }
        let mut m = k;
        while m < segs.len() && segs[m].x0 < x1 {
            let y0 = segs[m].x0.max(x0);
            let y1 = segs[m].x1.min(x1);
            if y1 > y0 {
                // Simpson's rule is exact for these quadratics.
                let ym = 0.5 * (y0 + y1);
                let (f0, fm, f1) = (segs[m].at(y0), segs[m].at(ym), segs[m].at(y1));
                let (s0, sm, s1) = ((y0 - x0) / h, (ym - x0) / h, (y1 - x0) / h);
                let simpson = |a: f64, b: f64, c: f64| (y1 - y0) / 6.0 * (a + 4.0 * b + c);
                p += simpson(f0 * (1.0 - s0), fm * (1.0 - sm), f1 * (1.0 - s1));
                q += simpson(f0 * s0, fm * sm, f1 * s1);
                g2 += simpson(f0 * f0, fm * fm, f1 * f1);
            }
            m += 1;
        }
        out.push(Cell { h, p, q, g2 });
    }
    out
}

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = b[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    cp[0] = c[0] / denom;
    dp[0] = d[0] / denom;
    for i in 1..n {
        denom = b[i] - a[i] * cp[i - 1];
        if denom.abs() < 1e-300 {
            return None;
        }
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Some(x)
}

struct Problem<'a> {
    grid: Vec<f64>,
    cells: Vec<Cell>,
    params: &'a MsParams,
    pin_left: Option<f64>,
    pin_right: Option<f64>,
    /// Constant used for a segment with `β = 0` and no pinned end.
    fallback: f64,
}

impl Problem<'_> {
    fn last(&self) -> usize {
        self.grid.len() - 1
    }

    fn segment_energy(&self, s: usize, e: usize, v: &[f64]) -> f64 {
        let beta = self.params.beta;
        (s..e)
            .map(|k| {
                let c = &self.cells[k];
                let (v0, v1) = (v[k - s], v[k + 1 - s]);
                let d = v1 - v0;
                let fid =
                    c.h / 3.0 * (v0 * v0 + v0 * v1 + v1 * v1) - 2.0 * (v0 * c.p + v1 * c.q) + c.g2;
                d * d / c.h + beta * fid
            })
            .sum()
    }

    /// Optimal nodal values on nodes `s..=e` and their energy.
    fn segment(&self, s: usize, e: usize) -> Result<(Vec<f64>, f64), SolverError> {
        let pl = if s == 0 { self.pin_left } else { None };
        let pr = if e == self.last() {
            self.pin_right
        } else {
            None
        };
        let beta = self.params.beta;
        let n = e - s + 1;
        let v = if beta == 0.0 && pl.is_none() && pr.is_none() {
            vec![self.fallback; n]
        } else {
            let (mut a, mut b, mut c, mut d) =
                (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for k in s..e {
                let cell = &self.cells[k];
                let (i, j) = (k - s, k + 1 - s);
                let diag = 1.0 / cell.h + beta * cell.h / 3.0;
                let off = -1.0 / cell.h + beta * cell.h / 6.0;
                b[i] += diag;
                b[j] += diag;
                c[i] += off;
                a[j] += off;
                d[i] += beta * cell.p;
                d[j] += beta * cell.q;
            }
            if let Some(val) = pl {
                (a[0], b[0], c[0], d[0]) = (0.0, 1.0, 0.0, val);
            }
            if let Some(val) = pr {
                (a[n - 1], b[n - 1], c[n - 1], d[n - 1]) = (0.0, 1.0, 0.0, val);
            }
            thomas(&a, &b, &c, &d).ok_or(SolverError::Singular { start: s, end: e })?
        };
        let energy = self.segment_energy(s, e, &v);
        Ok((v, energy))
    }

    fn table(&self) -> Result<Vec<Vec<f64>>, SolverError> {
        let n = self.grid.len();
        let mut t = vec![vec![f64::INFINITY; n]; n];
        for (s, row) in t.iter_mut().enumerate() {
            for (e, cell) in row.iter_mut().enumerate().skip(s + 1) {
                *cell = self.segment(s, e)?.1;
            }
        }
        Ok(t)
    }

    fn build(
        &self,
        cuts: &[usize],
        spec: Option<&DirichletSpec>,
    ) -> Result<SbvFunction, SolverError> {
        let mut bounds = vec![0];
        bounds.extend_from_slice(cuts);
        bounds.push(self.last());
        let mut pieces = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            let (v, _) = self.segment(w[0], w[1])?;
            pieces.push(Piece::new(self.grid[w[0]..=w[1]].to_vec(), v));
        }
        Ok(match spec {
            Some(s) => s.extend(pieces)?,
            None => SbvFunction::new(Interval::new(self.grid[0], self.grid[self.last()])?, pieces)?,
        })
    }
}

fn setup<'a>(
    g: &Measurement,
    p: &'a MsParams,
    spec: Option<&DirichletSpec>,
    n: usize,
) -> Result<Problem<'a>, SolverError> {
    p.validate()?;
    if n < 4 {
        return Err(SolverError::TooFewNodes(n));
    }
    let gi = g.interval();
    if let Some(s) = spec {
        let di = s.domain.interval();
        if !gi.same_as(&di) {
            return Err(SolverError::DomainMismatch {
                ga: gi.a,
                gb: gi.b,
                a: di.a,
                b: di.b,
            });
        }
    }
    let grid = solver_grid(g, spec, n);
    let cells = cells(&grid, g);
    let fallback = match spec {
        Some(s) => 0.5 * (s.left_trace() + s.right_trace()),
        None => {
            let mass: f64 = cells.iter().map(|c| c.p + c.q).sum();
            mass / gi.len()
        }
    };
    Ok(Problem {
        grid,
        cells,
        params: p,
        pin_left: spec.map(|s| s.left_trace()),
        pin_right: spec.map(|s| s.right_trace()),
        fallback,
    })
}

/// Whether `(cost_a, cuts_a)` beats `(cost_b, cuts_b)`: lower cost, then fewer
/// jumps, then the lexicographically leftmost cut list.
fn better(cost_a: f64, cuts_a: &[usize], cost_b: f64, cuts_b: &[usize]) -> bool {
    let tol = COST_TIE_REL * cost_a.abs().max(cost_b.abs()).max(1.0);
    if cost_a < cost_b - tol {
        return true;
    }
    if cost_a > cost_b + tol {
        return false;
    }
    (cuts_a.len(), cuts_a) < (cuts_b.len(), cuts_b)
}

/// A discrete minimizer with its energy on the whole interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: SbvFunction,
    pub energy: f64,
    pub jumps: Vec<f64>,
    pub grid: Vec<f64>,
}

/// JSON summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSummary {
    pub energy: f64,
    pub jumps: Vec<f64>,
    pub runtime_ms: f64,
}

impl MinimizeSummary {
    pub fn new(sol: &Solution, runtime_ms: f64) -> Self {
        Self {
            energy: sol.energy,
            jumps: sol.jumps.clone(),
            runtime_ms,
        }
    }
}

fn finish(
    g: &Measurement,
    p: &MsParams,
    spec: Option<&DirichletSpec>,
    prob: &Problem,
    cuts: &[usize],
) -> Result<Solution, SolverError> {
    let u = prob.build(cuts, spec)?;
    let energy = ms_energy(&u, g, p)?;
    let jumps = u.jump_set().iter().map(|j| j.x).collect();
    Ok(Solution {
        u,
        energy,
        jumps,
        grid: prob.grid.clone(),
    })
}

/// Dynamic program over the last cut before each node.
pub fn solve(
    g: &Measurement,
    p: &MsParams,
    spec: Option<&DirichletSpec>,
    n: usize,
) -> Result<Solution, SolverError> {
    let prob = setup(g, p, spec, n)?;
    let seg = prob.table()?;
    // best[j]: cheapest way to cover nodes 0..=j ending a segment at j.
    let mut best: Vec<(f64, Vec<usize>)> = Vec::with_capacity(n);
    best.push((0.0, Vec::new()));
    while best.len() < n {
        let j = best.len();
        let mut cand = (seg[0][j], Vec::new());
        for (i, (ci, cuts_i)) in best.iter().enumerate().skip(1) {
            let cost = ci + p.alpha + seg[i][j];
            let mut cuts = cuts_i.clone();
            cuts.push(i);
            if better(cost, &cuts, cand.0, &cand.1) {
                cand = (cost, cuts);
            }
        }
        best.push(cand);
    }
    let cuts = best.pop().unwrap().1;
    finish(g, p, spec, &prob, &cuts)
}

pub fn minimize(
    g: &Measurement,
    p: &MsParams,
    spec: Option<&DirichletSpec>,
    n: usize,
) -> Result<SbvFunction, SolverError> {
    Ok(solve(g, p, spec, n)?.u)
}

/// Enumerates every subset of interior cut nodes.
pub fn brute_force_solve(
    g: &Measurement,
    p: &MsParams,
    spec: Option<&DirichletSpec>,
    n: usize,
) -> Result<Solution, SolverError> {
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(SolverError::SizeLimit {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let prob = setup(g, p, spec, n)?;
    let interior = n - 2;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << interior) {
        let cuts: Vec<usize> = (0..interior)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| b + 1)
            .collect();
        let mut bounds = vec![0];
        bounds.extend_from_slice(&cuts);
        bounds.push(n - 1);
        let mut cost = p.alpha * cuts.len() as f64;
        for w in bounds.windows(2) {
            cost += prob.segment(w[0], w[1])?.1;
        }
        let take = match &best {
            None => true,
            Some((bc, bcuts)) => better(cost, &cuts, *bc, bcuts),
        };
        if take {
            best = Some((cost, cuts));
        }
    }
    let (_, cuts) = best.expect("at least the empty cut set");
    finish(g, p, spec, &prob, &cuts)
}

pub fn brute_force_minimize(
    g: &Measurement,
    p: &MsParams,
    spec: Option<&DirichletSpec>,
    n: usize,
) -> Result<SbvFunction, SolverError> {
    Ok(brute_force_solve(g, p, spec, n)?.u)
}

/// Random competitors for `u` on `d` whose inner parts live on the default
/// grid: [`DEFAULT_COMPETITOR_NODES`] uniform nodes on `I'` together with the
/// nodes of `u` inside `I'`.
pub fn perturb_inside(
    u: &SbvFunction,
    d: &Domain,
    seed: u64,
    count: usize,
) -> Vec<GraphCombination> {
    let mut grid = uniform(d.inner_a, d.inner_b, DEFAULT_COMPETITOR_NODES);
    grid.extend(
        u.breakpoints()
            .into_iter()
            .filter(|&x| x > d.inner_a && x < d.inner_b),
    );
    perturb_inside_on_grid(u, d, &grid, seed, count)
}

/// Random competitors `Σ λᵢ Γ_{vᵢ}` with `Σ λᵢ = 1`, each `vᵢ` equal to `u` on
/// the collars and piecewise linear on `grid ∩ [inner_a, inner_b]` inside, with
/// jumps allowed only at interior grid nodes. Nodes of `u` inside `I'` should
/// be on the grid for `u` itself to be representable.
pub fn perturb_inside_on_grid(
    u: &SbvFunction,
    d: &Domain,
    grid: &[f64],
    seed: u64,
    count: usize,
) -> Vec<GraphCombination> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x > d.inner_a && x < d.inner_b)
        .collect();
    nodes.push(d.inner_a);
    nodes.push(d.inner_b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);

    // Inner values: `(right trace, left trace)` at the ends of each cell.
    let base: Vec<(f64, f64)> = nodes
        .windows(2)
        .map(|w| {
            (
                u.right_value(w[0]).expect("node in domain"),
                u.left_value(w[1]).expect("node in domain"),
            )
        })
        .collect();
    let (lo, hi) = base
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
    let scale = (hi - lo).max(1.0);
    let collars = (u.clip(d.a, d.inner_a), u.clip(d.inner_b, d.b));
    let interior = nodes.len() - 2;

    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=4usize);
            let mut vals: Vec<Vec<(f64, f64)>> = vec![base.clone(); k];
            if interior > 0 {
                for v in vals.iter_mut() {
                    for _ in 0..rng.gen_range(1..=3) {
                        let node = rng.gen_range(1..=interior);
                        let delta = scale * rng.gen_range(-0.5..0.5);
                        match rng.gen_range(0..3) {
                            0 => {
                                v[node - 1].1 += delta;
                                v[node].0 += delta;
                            }
                            1 => v[node].0 += delta,
                            _ => {
                                let mid = 0.5 * (v[node - 1].1 + v[node].0);
                                v[node - 1].1 = mid;
                                v[node].0 = mid;
                            }
                        }
                    }
                }
                if k >= 2 && rng.gen_bool(0.5) {
                    let node = rng.gen_range(1..=interior);
                    let (i, j) = (rng.gen_range(0..k), rng.gen_range(0..k - 1));
                    let j = if j >= i { j + 1 } else { j };
                    if vals[j][node - 1].1 == vals[j][node].0 {
                        vals[j][node].0 += scale * rng.gen_range(0.1..0.5);
                    }
                    // vᵢ now leaves `node` where vⱼ arrives: vᵢ^r = vⱼ^l.
                    let (lj, rj) = (vals[j][node - 1].1, vals[j][node].0);
                    vals[i][node].0 = lj;
                    if rng.gen_bool(0.5) {
                        // Same orientation, so the pair stacks instead of cancelling.
                        vals[i][node - 1].1 = lj - (rj - lj) * rng.gen_range(0.25..1.5);
                    }
                }
            }
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let terms = vals
                .into_iter()
                .zip(raw)
                .map(|(v, w)| {
                    let mut pieces = collars.0.clone();
                    pieces.extend(
                        nodes
                            .windows(2)
                            .zip(&v)
                            .map(|(x, &(a, b))| Piece::linear(x[0], x[1], a, b)),
                    );
                    pieces.extend(collars.1.iter().cloned());
                    let f = SbvFunction::new(u.interval(), pieces).expect("valid competitor");
                    Term::new(w / total, f)
                })
                .collect();
            GraphCombination::new(terms).expect("positive weights")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn jump_vs_ramp_spec() -> DirichletSpec {
        let d = Domain::new(0.0, 1.0, 0.25, 0.75).unwrap();
        DirichletSpec::new(
            d,
            vec![Piece::linear(0.0, 0.25, 0.0, 0.0)],
            vec![Piece::linear(0.75, 1.0, 1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn thomas_solves_a_small_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [3 4 3] → x = 1
        let x = thomas(
            &[0.0, 1.0, 1.0],
            &[2.0; 3],
            &[1.0, 1.0, 0.0],
            &[3.0, 4.0, 3.0],
        )
        .unwrap();
        for v in x {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_data_is_reproduced() {
        let g = SbvFunction::constant(unit(), 2.5);
        for beta in [0.0, 1.0] {
            let p = MsParams::new(1.0, beta).unwrap();
            let s = solve(&g, &p, None, 11).unwrap();
            assert!(s.u.approx_eq(&g, 1e-12), "beta {beta}");
            assert_abs_diff_eq!(s.energy, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dirichlet_jump_beats_ramp() {
        let g = SbvFunction::constant(unit(), 0.0);
        let p = MsParams::new(1.0, 0.0).unwrap();
        let s = solve(&g, &p, Some(&jump_vs_ramp_spec()), 9).unwrap();
        assert_eq!(s.jumps.len(), 1);
        assert_abs_diff_eq!(s.energy, 1.0, epsilon = 1e-12);
        // leftmost cut among the tied ones
        assert_abs_diff_eq!(s.jumps[0], 0.25 + 0.5 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn ramp_wins_when_jumps_are_expensive() {
        let g = SbvFunction::constant(unit(), 0.0);
        let p = MsParams::new(3.0, 0.0).unwrap();
        let s = solve(&g, &p, Some(&jump_vs_ramp_spec()), 9).unwrap();
        assert!(s.jumps.is_empty());
        assert_abs_diff_eq!(s.energy, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_agrees_on_a_step() {
        let g = SbvFunction::new(
            unit(),
            vec![
                Piece::linear(0.0, 0.4, 0.0, 0.0),
                Piece::linear(0.4, 1.0, 1.0, 1.0),
            ],
        )
        .unwrap();
        let p = MsParams::new(0.05, 5.0).unwrap();
        let a = solve(&g, &p, None, 10).unwrap();
        let b = brute_force_solve(&g, &p, None, 10).unwrap();
        assert_abs_diff_eq!(a.energy, b.energy, epsilon = 1e-10);
        assert_eq!(a.jumps, b.jumps);
    }

    #[test]
    fn size_limits() {
        let g = SbvFunction::constant(unit(), 0.0);
        let p = MsParams::new(1.0, 1.0).unwrap();
        assert_eq!(
            solve(&g, &p, None, 3).unwrap_err(),
            SolverError::TooFewNodes(3)
        );
        assert!(matches!(
            brute_force_solve(&g, &p, None, 13),
            Err(SolverError::SizeLimit { n: 13, .. })
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let s = jump_vs_ramp_spec();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"inner\":[0.25,0.75]"));
        let back: DirichletSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn collar_must_cover_its_interval() {
        let d = Domain::new(0.0, 1.0, 0.25, 0.75).unwrap();
        let r = DirichletSpec::new(
            d,
            vec![Piece::linear(0.0, 0.2, 0.0, 0.0)],
            vec![Piece::linear(0.75, 1.0, 1.0, 1.0)],
        );
        assert!(matches!(r, Err(SolverError::InvalidBoundary(_))));
    }

    #[test]
    fn no_competitors_requested() {
        let u = SbvFunction::constant(unit(), 0.0);
        let d = Domain::new(0.0, 1.0, 0.25, 0.75).unwrap();
        assert!(perturb_inside(&u, &d, 1, 0).is_empty());
    }

    #[test]
    fn competitors_are_normalized_and_deterministic() {
        let u = SbvFunction::constant(unit(), 0.0);
        let d = Domain::new(0.0, 1.0, 0.25, 0.75).unwrap();
        let a = perturb_inside(&u, &d, 7, 20);
        let b = perturb_inside(&u, &d, 7, 20);
        assert_eq!(a, b);
        for t in &a {
            assert!((t.total_weight() - 1.0).abs() < 1e-12);
            assert!((1..=4).contains(&t.len()));
        }
    }
}
