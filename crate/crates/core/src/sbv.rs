//! Piecewise-linear special functions of bounded variation on an interval and
//! the one-dimensional Mumford-Shah energy
//!
//! ```text
//! F(u) = ∫ (u')² dx + β ∫ |u - g|² dx + α · #S_u
//! ```
//!
//! A function is a sequence of pieces tiling `(a, b)`. Inside a piece it is the
//! linear interpolant of its nodes; the abscissa shared by two consecutive
//! pieces is a jump point whose one-sided traces are the last value of the left
//! piece and the first value of the right piece. All integrals are evaluated in
//! closed form on the common refinement of the node sets involved, so energies
//! carry no quadrature error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Traces closer than this are the same value; the pieces are merged on construction.
pub const TRACE_MERGE_TOL: f64 = 1e-12;

/// Relative tolerance used to snap node abscissae onto shared boundaries.
const ABSCISSA_SNAP: f64 = 1e-12;

/// The Dirichlet term `∫(u')²` carries no α weight; α multiplies only the jump count.
pub const DIRICHLET_CONVENTION: &str = "unweighted";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbvError {
    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("a function needs at least one piece")]
    NoPieces,
    #[error("piece {piece}: {reason}")]
    InvalidPiece { piece: usize, reason: String },
    #[error("piece {piece} starts at {found}, expected {expected}")]
    Gap {
        piece: usize,
        expected: f64,
        found: f64,
    },
    #[error("last piece ends at {found}, expected the interval end {expected}")]
    BadEnd { expected: f64, found: f64 },
    #[error("domain mismatch: [{}, {}] vs [{}, {}]", .left.a, .left.b, .right.a, .right.b)]
    DomainMismatch { left: Interval, right: Interval },
    #[error("abscissa {x} lies outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// The open interval `(a, b)` a function lives on. Serialized as `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, SbvError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(SbvError::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }

    fn snap_tol(&self) -> f64 {
        ABSCISSA_SNAP * (1.0 + self.a.abs().max(self.b.abs()))
    }

    /// Same endpoints up to the snapping tolerance.
    pub fn same_as(&self, other: &Interval) -> bool {
        let tol = self.snap_tol().max(other.snap_tol());
        (self.a - other.a).abs() <= tol && (self.b - other.b).abs() <= tol
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = SbvError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.a, i.b]
    }
}

/// An interval `I = (a, b)` together with a compactly contained subinterval
/// `I' = (inner_a, inner_b)`; competitors must agree outside `I'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub inner_a: f64,
    pub inner_b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64, inner_a: f64, inner_b: f64) -> Result<Self, SbvError> {
        let all_finite = [a, b, inner_a, inner_b].iter().all(|v| v.is_finite());
        if !(all_finite && a < inner_a && inner_a < inner_b && inner_b < b) {
            return Err(SbvError::InvalidDomain(format!(
                "need a < inner_a < inner_b < b, got {a}, {inner_a}, {inner_b}, {b}"
            )));
        }
        Ok(Self {
            a,
            b,
            inner_a,
            inner_b,
        })
    }

    pub fn interval(&self) -> Interval {
        Interval {
            a: self.a,
            b: self.b,
        }
    }

    pub fn inner(&self) -> Interval {
        Interval {
            a: self.inner_a,
            b: self.inner_b,
        }
    }
}

/// Nodes and values of one linear-interpolation piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl Piece {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        Self { nodes, values }
    }

    pub fn linear(x0: f64, x1: f64, v0: f64, v1: f64) -> Self {
        Self {
            nodes: vec![x0, x1],
            values: vec![v0, v1],
        }
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| Segment {
                x0: x[0],
                x1: x[1],
                v0: v[0],
                v1: v[1],
            })
    }

    /// Value at `x` in `[start, end]`, interpolated inside the piece.
    fn eval(&self, x: f64) -> f64 {
        let k = match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(k) => return self.values[k],
            Err(k) => k,
        };
        if k == 0 {
            return self.values[0];
        }
        if k >= self.nodes.len() {
            return self.last_value();
        }
        Segment {
            x0: self.nodes[k - 1],
            x1: self.nodes[k],
            v0: self.values[k - 1],
            v1: self.values[k],
        }
        .at(x)
    }

    /// The part of the piece on `[lo, hi]`, cutting with interpolated nodes.
    fn clip(&self, lo: f64, hi: f64) -> Option<Piece> {
        let lo = lo.max(self.start());
        let hi = hi.min(self.end());
        if hi <= lo {
            return None;
        }
        let mut nodes = vec![lo];
        let mut values = vec![self.eval(lo)];
        for (&x, &v) in self.nodes.iter().zip(&self.values) {
            if x > lo && x < hi {
                nodes.push(x);
                values.push(v);
            }
        }
        nodes.push(hi);
        values.push(self.eval(hi));
        Some(Piece { nodes, values })
    }
}

/// A single linear segment `[x0, x1]` with end values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn slope(&self) -> f64 {
        (self.v1 - self.v0) / (self.x1 - self.x0)
    }

    pub fn at(&self, x: f64) -> f64 {
        if x == self.x0 {
            self.v0
        } else if x == self.x1 {
            self.v1
        } else {
            let t = (x - self.x0) / (self.x1 - self.x0);
            self.v0 + t * (self.v1 - self.v0)
        }
    }
}

/// A point of the jump set with its left and right traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

impl Jump {
    pub fn height(&self) -> f64 {
        (self.right - self.left).abs()
    }

    pub fn is_up(&self) -> bool {
        self.right > self.left
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSbv {
    domain: Interval,
    pieces: Vec<Piece>,
}

/// Piecewise-linear SBV function with finitely many jumps.
///
/// Construction validates the tiling, merges pieces whose shared traces agree
/// within [`TRACE_MERGE_TOL`] and drops interior nodes that are collinear with
/// their neighbours, so equal functions have equal representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSbv", into = "RawSbv")]
pub struct SbvFunction {
    interval: Interval,
    pieces: Vec<Piece>,
}

/// The datum `g` of the fidelity term.
pub type Measurement = SbvFunction;

impl TryFrom<RawSbv> for SbvFunction {
    type Error = SbvError;
    fn try_from(raw: RawSbv) -> Result<Self, Self::Error> {
        SbvFunction::new(raw.domain, raw.pieces)
    }
}

impl From<SbvFunction> for RawSbv {
    fn from(f: SbvFunction) -> Self {
        RawSbv {
            domain: f.interval,
            pieces: f.pieces,
        }
    }
}

impl SbvFunction {
    pub fn new(interval: Interval, mut pieces: Vec<Piece>) -> Result<Self, SbvError> {
        Interval::new(interval.a, interval.b)?;
        if pieces.is_empty() {
            return Err(SbvError::NoPieces);
        }
        let snap = interval.snap_tol();
        for (k, p) in pieces.iter().enumerate() {
            let bad = |reason: &str| SbvError::InvalidPiece {
                piece: k,
                reason: reason.to_string(),
            };
            if p.nodes.len() != p.values.len() {
                return Err(bad("nodes and values differ in length"));
            }
            if p.nodes.len() < 2 {
                return Err(bad("needs at least two nodes"));
            }
            if p.nodes.iter().chain(&p.values).any(|v| !v.is_finite()) {
                return Err(bad("non-finite entry"));
            }
            if p.nodes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("nodes must be strictly increasing"));
            }
        }
        if (pieces[0].start() - interval.a).abs() > snap {
            return Err(SbvError::Gap {
                piece: 0,
                expected: interval.a,
                found: pieces[0].start(),
            });
        }
        pieces[0].nodes[0] = interval.a;
        for k in 1..pieces.len() {
            let expected = pieces[k - 1].end();
            let found = pieces[k].start();
            if (expected - found).abs() > snap {
                return Err(SbvError::Gap {
                    piece: k,
                    expected,
                    found,
                });
            }
            pieces[k].nodes[0] = expected;
            if pieces[k].nodes.len() > 1 && pieces[k].nodes[1] <= expected {
                return Err(SbvError::InvalidPiece {
                    piece: k,
                    reason: "nodes must be strictly increasing".into(),
                });
            }
        }
        let last = pieces.last_mut().unwrap();
        if (last.end() - interval.b).abs() > snap {
            return Err(SbvError::BadEnd {
                expected: interval.b,
                found: last.end(),
            });
        }
        *last.nodes.last_mut().unwrap() = interval.b;

        let mut merged: Vec<Piece> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match merged.last_mut() {
                Some(prev) if (prev.last_value() - p.first_value()).abs() <= TRACE_MERGE_TOL => {
                    prev.nodes.extend_from_slice(&p.nodes[1..]);
                    prev.values.extend_from_slice(&p.values[1..]);
                }
                _ => merged.push(p),
            }
        }
        for p in &mut merged {
            drop_collinear(p);
        }
        Ok(Self {
            interval,
            pieces: merged,
        })
    }

    pub fn constant(interval: Interval, c: f64) -> Self {
        Self::new(interval, vec![Piece::linear(interval.a, interval.b, c, c)])
            .expect("constant function on a valid interval")
    }

    /// Continuous linear function with the given end values.
    pub fn linear(interval: Interval, va: f64, vb: f64) -> Self {
        Self::new(
            interval,
            vec![Piece::linear(interval.a, interval.b, va, vb)],
        )
        .expect("linear function on a valid interval")
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<Piece> {
        self.pieces
    }

    pub fn jump_set(&self) -> Vec<Jump> {
        self.pieces
            .windows(2)
            .map(|w| Jump {
                x: w[0].end(),
                left: w[0].last_value(),
                right: w[1].first_value(),
            })
            .collect()
    }

    pub fn jump_count(&self) -> usize {
        self.pieces.len() - 1
    }

    /// The jump at `x`, if one lies within `tol`.
    pub fn jump_at(&self, x: f64, tol: f64) -> Option<Jump> {
        self.jump_set().into_iter().find(|j| (j.x - x).abs() <= tol)
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.pieces.iter().flat_map(|p| p.segments())
    }

    /// All node abscissae, including both ends and jump points.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| p.nodes.iter().copied())
            .collect();
        xs.dedup();
        xs
    }

    fn check_inside(&self, x: f64) -> Result<(), SbvError> {
        if x < self.interval.a || x > self.interval.b {
            return Err(SbvError::OutOfDomain {
                x,
                a: self.interval.a,
                b: self.interval.b,
            });
        }
        Ok(())
    }

    /// Left trace `u^l(x)`; at `x = a` this is the value at `a`.
    pub fn left_value(&self, x: f64) -> Result<f64, SbvError> {
        self.check_inside(x)?;
        let p = self
            .pieces
            .iter()
            .find(|p| x <= p.end())
            .unwrap_or_else(|| self.pieces.last().unwrap());
        Ok(p.eval(x))
    }

    /// Right trace `u^r(x)`; at `x = b` this is the value at `b`.
    pub fn right_value(&self, x: f64) -> Result<f64, SbvError> {
        self.check_inside(x)?;
        let p = self
            .pieces
            .iter()
            .rev()
            .find(|p| x >= p.start())
            .unwrap_or(&self.pieces[0]);
        Ok(p.eval(x))
    }

    /// Pieces of the function restricted to `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> Vec<Piece> {
        self.pieces.iter().filter_map(|p| p.clip(lo, hi)).collect()
    }

    /// The function equal to `left` on `(a, x)` and to `right` on `(x, b)`.
    ///
    /// When the two traces at `x` differ by at most `snap`, the right-hand value
    /// is replaced by the left trace so the result is continuous there.
    pub fn splice(
        left: &SbvFunction,
        right: &SbvFunction,
        x: f64,
        snap: f64,
    ) -> Result<SbvFunction, SbvError> {
        if !left.interval.same_as(&right.interval) {
            return Err(SbvError::DomainMismatch {
                left: left.interval,
                right: right.interval,
            });
        }
        let iv = left.interval;
        if !iv.contains_open(x) {
            return Err(SbvError::OutOfDomain {
                x,
                a: iv.a,
                b: iv.b,
            });
        }
        let mut pieces = left.clip(iv.a, x);
        let mut tail = right.clip(x, iv.b);
        let lt = pieces.last().unwrap().last_value();
        let rt = &mut tail[0].values[0];
        if (lt - *rt).abs() <= snap {
            *rt = lt;
        }
        pieces.extend(tail);
        SbvFunction::new(iv, pieces)
    }

    /// Pointwise multiple `c · u`.
    pub fn scaled(&self, c: f64) -> SbvFunction {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                nodes: p.nodes.clone(),
                values: p.values.iter().map(|v| c * v).collect(),
            })
            .collect();
        SbvFunction::new(self.interval, pieces).expect("scaling preserves validity")
    }

    /// Same function up to `tol` in abscissae and values, piece by piece.
    pub fn approx_eq(&self, other: &SbvFunction, tol: f64) -> bool {
        self.interval.same_as(&other.interval)
            && self.pieces.len() == other.pieces.len()
            && self.pieces.iter().zip(&other.pieces).all(|(p, q)| {
                p.nodes.len() == q.nodes.len()
                    && p.nodes
                        .iter()
                        .zip(&q.nodes)
                        .all(|(a, b)| (a - b).abs() <= tol)
                    && p.values
                        .iter()
                        .zip(&q.values)
                        .all(|(a, b)| (a - b).abs() <= tol)
            })
    }
}

fn drop_collinear(p: &mut Piece) {
    if p.nodes.len() <= 2 {
        return;
    }
    let mut nodes = vec![p.nodes[0]];
    let mut values = vec![p.values[0]];
    for k in 1..p.nodes.len() - 1 {
        let (x0, v0) = (*nodes.last().unwrap(), *values.last().unwrap());
        let (x1, v1) = (p.nodes[k], p.values[k]);
        let (x2, v2) = (p.nodes[k + 1], p.values[k + 1]);
        let s1 = (v1 - v0) / (x1 - x0);
        let s2 = (v2 - v1) / (x2 - x1);
        if (s1 - s2).abs() > 1e-12 * (1.0 + s1.abs().max(s2.abs())) {
            nodes.push(x1);
            values.push(v1);
        }
    }
    nodes.push(*p.nodes.last().unwrap());
    values.push(*p.values.last().unwrap());
    p.nodes = nodes;
    p.values = values;
}

/// Parameters `α > 0` (jump penalty) and `β ≥ 0` (fidelity weight).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MsParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, SbvError> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SbvError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SbvError::InvalidParams(format!(
                "alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(SbvError::InvalidParams(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Integrates a quadratic form of two functions over the common refinement of
/// their node sets. `f` receives `(width, u0, u1, g0, g1)` for each elementary
/// interval, where the end values are the one-sided limits from inside it.
fn fold_common<F: FnMut(f64, f64, f64, f64, f64)>(u: &SbvFunction, g: &SbvFunction, mut f: F) {
    let us: Vec<Segment> = u.segments().collect();
    let gs: Vec<Segment> = g.segments().collect();
    let (mut i, mut j) = (0, 0);
    let mut x = u.interval.a;
    while i < us.len() && j < gs.len() {
        let end = us[i].x1.min(gs[j].x1);
        if end > x {
            f(
                end - x,
                us[i].at(x),
                us[i].at(end),
                gs[j].at(x),
                gs[j].at(end),
            );
            x = end;
        }
        if us[i].x1 <= end {
            i += 1;
        }
        if gs[j].x1 <= end {
            j += 1;
        }
    }
}

/// `∫ (u')² dx`, exactly.
pub fn dirichlet_integral(u: &SbvFunction) -> f64 {
    u.segments()
        .map(|s| (s.v1 - s.v0).powi(2) / s.width())
        .sum()
}

/// `∫ |u - g|² dx`, exactly.
pub fn fidelity_integral(u: &SbvFunction, g: &Measurement) -> Result<f64, SbvError> {
    if !u.interval.same_as(&g.interval) {
        return Err(SbvError::DomainMismatch {
            left: u.interval,
            right: g.interval,
        });
    }
    let mut acc = 0.0;
    fold_common(u, g, |h, u0, u1, g0, g1| {
        let d0 = u0 - g0;
        let d1 = u1 - g1;
        acc += h * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    });
    Ok(acc)
}

/// `∫(u')² + β∫|u - g|²`, the per-graph absolutely continuous part of the energy.
pub fn regular_energy(u: &SbvFunction, g: &Measurement, p: &MsParams) -> Result<f64, SbvError> {
    let fid = fidelity_integral(u, g)?;
    Ok(dirichlet_integral(u) + p.beta * fid)
}

/// The Mumford-Shah energy `F(u)`.
pub fn ms_energy(u: &SbvFunction, g: &Measurement, p: &MsParams) -> Result<f64, SbvError> {
    Ok(regular_energy(u, g, p)? + p.alpha * u.jump_count() as f64)
}

/// The jump set with traces, sorted by abscissa.
pub fn jump_set(u: &SbvFunction) -> Vec<Jump> {
    u.jump_set()
}
