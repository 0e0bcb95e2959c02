//! The lifted functional `G` on positive combinations of graphs.
//!
//! `G(T)` splits into a regular part, carried by the graphs away from the jump
//! columns, and a singular part, one term per column. On a column with merged
//! profile `f₁ … f_m` the supremum over admissible fields is
//! `α · PosVar(0, f₁, …, f_m, 0)`: writing the flux as `Σ Φᵢ (fᵢ − fᵢ₊₁)` for the
//! running integral `Φ` of `φˣ`, whose oscillation is at most `α`, the best `Φ`
//! sits at the top of its window after each descent and at the bottom after
//! each rise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::currents::{
    cancellations, restrict_outside, slice_profile, ColumnProfile, CurrentsError, GraphCombination,
    EQ_TOL,
};
use crate::decompose::{decompose, DecomposeError};
use crate::sbv::{
    ms_energy, regular_energy, Domain, Measurement, MsParams, SbvError, SbvFunction,
    DIRICHLET_CONVENTION,
};
use crate::simplex::{maximize, LpError};

/// Largest profile the LP oracle accepts.
pub const ORACLE_MAX_INTERVALS: usize = 40;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error(transparent)]
    Sbv(#[from] SbvError),
    #[error(transparent)]
    Currents(#[from] CurrentsError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("profile has {m} intervals; the oracle accepts at most {max}")]
    SizeLimit { m: usize, max: usize },
    #[error("terms {i} and {j} cancel at x = {x} on the values ({lo}, {hi})")]
    Cancellation {
        i: usize,
        j: usize,
        x: f64,
        lo: f64,
        hi: f64,
    },
    #[error("competitors {ids:?} do not agree with u outside the inner interval")]
    BoundaryMismatch { ids: Vec<usize> },
    #[error("competitor {id}: weights sum to {sum}, expected 1")]
    NotNormalized { id: usize, sum: f64 },
    #[error("competitor {id}: part {part} of its decomposition leaves the boundary data")]
    PartMismatch { id: usize, part: usize },
    #[error("competitor {id}: {source}")]
    Decompose {
        id: usize,
        #[source]
        source: Box<DecomposeError>,
    },
}

/// `α`, `β` and the measurement `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftParams {
    pub ms: MsParams,
    pub g: Measurement,
}

impl LiftParams {
    pub fn new(alpha: f64, beta: f64, g: Measurement) -> Result<Self, SbvError> {
        Ok(Self {
            ms: MsParams::new(alpha, beta)?,
            g,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.ms.alpha
    }

    pub fn beta(&self) -> f64 {
        self.ms.beta
    }
}

/// Positive variation of `0, levels…, 0`.
pub fn positive_variation(levels: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut pv = 0.0;
    for &l in levels.iter().chain(std::iter::once(&0.0)) {
        if l > prev {
            pv += l - prev;
        }
        prev = l;
    }
    pv
}

/// Supremum of the flux of admissible fields through one column.
pub fn column_energy(p: &ColumnProfile, alpha: f64) -> f64 {
    alpha * positive_variation(&p.levels)
}

/// The column supremum solved as a linear program over `yᵢ = φᵢhᵢ`:
/// maximize `Σ fᵢyᵢ` subject to `|yₛ + … + yₑ| ≤ α` for all `s ≤ e`.
pub fn column_energy_oracle(p: &ColumnProfile, alpha: f64) -> Result<f64, LiftError> {
    let m = p.len();
    if m > ORACLE_MAX_INTERVALS {
        return Err(LiftError::SizeLimit {
            m,
            max: ORACLE_MAX_INTERVALS,
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    // y = y⁺ − y⁻ with both parts nonnegative.
    let mut c = vec![0.0; 2 * m];
    for (i, &f) in p.levels.iter().enumerate() {
        c[i] = f;
        c[m + i] = -f;
    }
    let mut a = Vec::with_capacity(m * (m + 1));
    for s in 0..m {
        for e in s..m {
            let mut up = vec![0.0; 2 * m];
            for i in s..=e {
                up[i] = 1.0;
                up[m + i] = -1.0;
            }
            let down: Vec<f64> = up.iter().map(|v| -v).collect();
            a.push(up);
            a.push(down);
        }
    }
    let b = vec![alpha; a.len()];
    Ok(maximize(&c, &a, &b)?.value)
}

/// An optimal admissible field on one column: `φˣ` piecewise constant on the
/// profile intervals and `φᵗ` on the equality branch `(φˣ)²/4 − β(t − g(x))²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCalibration {
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub g_value: f64,
    pub breakpoints: Vec<f64>,
    pub phi_x: Vec<f64>,
    /// `Φ₀ = 0, Φ₁, …, Φ_m`: the running integral at each breakpoint.
    pub running: Vec<f64>,
}

impl ColumnCalibration {
    pub fn phi_x_at(&self, t: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.phi_x)
            .find(|(w, _)| t > w[0] && t < w[1])
            .map_or(0.0, |(_, &v)| v)
    }

    pub fn phi_t_at(&self, t: f64) -> f64 {
        let px = self.phi_x_at(t);
        px * px / 4.0 - self.beta * (t - self.g_value).powi(2)
    }

    /// `φᵗ − (φˣ)²/4 + β(t − g)²`, nonnegative for an admissible field.
    pub fn condition_slack(&self, t: f64) -> f64 {
        let px = self.phi_x_at(t);
        self.phi_t_at(t) - px * px / 4.0 + self.beta * (t - self.g_value).powi(2)
    }

    pub fn oscillation(&self) -> f64 {
        let hi = self.running.iter().copied().fold(0.0, f64::max);
        let lo = self.running.iter().copied().fold(0.0, f64::min);
        hi - lo
    }

    pub fn is_admissible(&self, tol: f64) -> bool {
        self.oscillation() <= self.alpha + tol
    }

    /// `∫ level(t) φˣ(t) dt` for a profile on the same column.
    pub fn flux(&self, p: &ColumnProfile) -> f64 {
        let mut ts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&p.breakpoints)
            .copied()
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                p.level_at(mid) * self.phi_x_at(mid) * (w[1] - w[0])
            })
            .sum()
    }
}

/// Builds the optimal column field for a merged profile. Works for any
/// profile; the window of `Φ` is `[0, α]` when the first level is positive and
/// `[−α, 0]` otherwise.
pub fn calibration_from_profile(
    p: &ColumnProfile,
    alpha: f64,
    beta: f64,
    g_value: f64,
) -> ColumnCalibration {
    let m = p.len();
    let (lo, hi) = match p.levels.first() {
        Some(&f) if f < 0.0 => (-alpha, 0.0),
        _ => (0.0, alpha),
    };
    let mut running = Vec::with_capacity(m + 1);
    running.push(0.0);
    let mut phi_x = Vec::with_capacity(m);
    for i in 0..m {
        let next = p.levels.get(i + 1).copied().unwrap_or(0.0);
        let v = if p.levels[i] > next { hi } else { lo };
        phi_x.push((v - running[i]) / (p.breakpoints[i + 1] - p.breakpoints[i]));
        running.push(v);
    }
    ColumnCalibration {
        x: p.x,
        alpha,
        beta,
        g_value,
        breakpoints: p.breakpoints.clone(),
        phi_x,
        running,
    }
}

/// The optimal field on the column `{x} × ℝ` of `t`, after checking that no
/// two terms cancel there.
pub fn build_column_calibration(
    t: &GraphCombination,
    x: f64,
    params: &LiftParams,
) -> Result<ColumnCalibration, LiftError> {
    if let Some(c) = cancellations(t)
        .into_iter()
        .find(|c| (c.x - x).abs() <= EQ_TOL)
    {
        return Err(LiftError::Cancellation {
            i: c.i,
            j: c.j,
            x: c.x,
            lo: c.overlap.0,
            hi: c.overlap.1,
        });
    }
    let p = slice_profile(t, x)?;
    let g_value = params.g.left_value(x)?;
    Ok(calibration_from_profile(
        &p,
        params.alpha(),
        params.beta(),
        g_value,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub x: f64,
    pub energy: f64,
    pub profile: ColumnProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub total: f64,
    pub regular: f64,
    pub singular: f64,
    pub columns: Vec<ColumnReport>,
    pub dirichlet_term: String,
}

/// `G(T)` as regular part plus the column energies over `S_T`.
pub fn evaluate(t: &GraphCombination, params: &LiftParams) -> Result<LiftReport, LiftError> {
    let mut regular = 0.0;
    for term in t.terms() {
        regular += term.weight * regular_energy(&term.func, &params.g, &params.ms)?;
    }
    let mut columns = Vec::new();
    let mut singular = 0.0;
    for x in t.jump_columns() {
        let profile = slice_profile(t, x)?;
        let energy = column_energy(&profile, params.alpha());
        singular += energy;
        columns.push(ColumnReport { x, energy, profile });
    }
    Ok(LiftReport {
        total: regular + singular,
        regular,
        singular,
        columns,
        dirichlet_term: DIRICHLET_CONVENTION.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub competitor_id: usize,
    pub weight_sum: f64,
    pub lifted_energy: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub energy: f64,
    pub tol: f64,
    pub certificates: Vec<Certificate>,
}

impl CertificateReport {
    pub fn all_certified(&self) -> bool {
        self.certificates
            .iter()
            .all(|c| c.verdict == Verdict::Certified)
    }

    pub fn min_margin(&self) -> Option<f64> {
        self.certificates.iter().map(|c| c.margin).reduce(f64::min)
    }
}

/// Compares `F(u)` with `G(T)` for competitors that agree with `u` outside the
/// inner interval. Each `G(T)` is realized by a decomposition into single
/// graphs, each of which is itself checked against the boundary data.
pub fn certify_minimality(
    u: &SbvFunction,
    params: &LiftParams,
    d: &Domain,
    competitors: &[GraphCombination],
    tol: f64,
) -> Result<CertificateReport, LiftError> {
    let target = restrict_outside(&GraphCombination::graph(u.clone()), d)?;
    let mut bad = Vec::new();
    for (id, t) in competitors.iter().enumerate() {
        if t.is_empty() || !restrict_outside(t, d)?.approx_eq(&target, EQ_TOL) {
            bad.push(id);
        }
    }
    if !bad.is_empty() {
        return Err(LiftError::BoundaryMismatch { ids: bad });
    }

    let energy = ms_energy(u, &params.g, &params.ms)?;
    let mut certificates = Vec::with_capacity(competitors.len());
    for (id, t) in competitors.iter().enumerate() {
        let dec = decompose(t, params).map_err(|e| LiftError::Decompose {
            id,
            source: Box::new(e),
        })?;
        let weight_sum: f64 = dec.parts.iter().map(|p| p.mu).sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(LiftError::NotNormalized {
                id,
                sum: weight_sum,
            });
        }
        for (k, part) in dec.parts.iter().enumerate() {
            let r = restrict_outside(&GraphCombination::graph(part.func.clone()), d)?;
            if !r.approx_eq(&target, EQ_TOL) {
                return Err(LiftError::PartMismatch { id, part: k });
            }
        }
        let lifted_energy = dec.lifted_energy;
        let margin = lifted_energy - energy;
        certificates.push(Certificate {
            competitor_id: id,
            weight_sum,
            lifted_energy,
            margin,
            verdict: if margin >= -tol {
                Verdict::Certified
            } else {
                Verdict::NotCertified
            },
        });
    }
    Ok(CertificateReport {
        energy,
        tol,
        certificates,
    })
}
