use std::process::ExitCode;

use clap::ValueEnum;
use serde::Serialize;

use mslift::currents::{GraphCombination, Term};
use mslift::decompose::{decompose, Checks, Step};
use mslift::lift::{evaluate, LiftParams};
use mslift::sbv::{ms_energy, Interval, Piece, SbvFunction};

use crate::commands::{emit, emit_plot, parts_panel};
use crate::config::{Classify, Outcome, RunConfig, Shared};
use crate::plot::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    /// ½Γ_{u₁} + ½Γ_{u₂} with lifted energy below the average of F.
    CoareaCounterexample,
    /// Two graphs with adjacent jumps, untangled by a tail exchange.
    Figure3Swap,
}

impl DemoName {
    fn as_str(self) -> &'static str {
        match self {
            DemoName::CoareaCounterexample => "coarea-counterexample",
            DemoName::Figure3Swap => "figure3-swap",
        }
    }
}

#[derive(Debug, Serialize)]
struct PartReport {
    mu: f64,
    energy: f64,
    func: SbvFunction,
}

#[derive(Debug, Serialize)]
struct DemoReport {
    demo: &'static str,
    alpha: f64,
    beta: f64,
    input: GraphCombination,
    naive_average: f64,
    lifted: f64,
    parts: Vec<PartReport>,
    provenance: Vec<Step>,
    checks: Checks,
}

fn unit() -> Interval {
    Interval::new(0.0, 1.0).expect("valid interval")
}

fn pieces(ps: Vec<Piece>) -> SbvFunction {
    SbvFunction::new(unit(), ps).expect("valid demo function")
}

/// `u₁ = 0` on `(0, ½]` and `x` after; `u₂ = x` up to `½` and `1` after.
fn coarea_pair() -> (SbvFunction, SbvFunction) {
    (
        pieces(vec![
            Piece::linear(0.0, 0.5, 0.0, 0.0),
            Piece::linear(0.5, 1.0, 0.5, 1.0),
        ]),
        pieces(vec![
            Piece::linear(0.0, 0.5, 0.0, 0.5),
            Piece::linear(0.5, 1.0, 1.0, 1.0),
        ]),
    )
}

/// `u₁` jumps from 2 to 3 and `u₂` from 3 to 4 at `½`.
fn adjacent_pair() -> (SbvFunction, SbvFunction) {
    let step = |lo: f64, hi: f64| {
        pieces(vec![
            Piece::linear(0.0, 0.5, lo, lo),
            Piece::linear(0.5, 1.0, hi, hi),
        ])
    };
    (step(2.0, 3.0), step(3.0, 4.0))
}

pub fn run_demo(name: DemoName, cfg: &RunConfig, shared: &Shared) -> Outcome<ExitCode> {
    let (u1, u2) = match name {
        DemoName::CoareaCounterexample => coarea_pair(),
        DemoName::Figure3Swap => adjacent_pair(),
    };
    let t = GraphCombination::new(vec![Term::new(0.5, u1.clone()), Term::new(0.5, u2.clone())])
        .failed()?;
    let p = LiftParams::new(cfg.alpha, cfg.beta, SbvFunction::constant(unit(), 0.0)).invalid()?;
    let f = |u: &SbvFunction| ms_energy(u, &p.g, &p.ms).failed();
    let naive_average = 0.5 * f(&u1)? + 0.5 * f(&u2)?;
    let lifted = evaluate(&t, &p).failed()?.total;
    let d = decompose(&t, &p).failed()?;
    let parts = d
        .parts
        .iter()
        .map(|part| {
            Ok(PartReport {
                mu: part.mu,
                energy: f(&part.func)?,
                func: part.func.clone(),
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    let report = DemoReport {
        demo: name.as_str(),
        alpha: cfg.alpha,
        beta: cfg.beta,
        input: t.clone(),
        naive_average,
        lifted,
        parts,
        provenance: d.provenance.clone(),
        checks: d.checks,
    };
    emit(&report, cfg, shared)?;
    let before = Panel::new("before")
        .curve(u1, 0.5, "u1 (weight 0.5)")
        .curve(u2, 0.5, "u2 (weight 0.5)");
    emit_plot(&[before, parts_panel("after", &d)], cfg, shared)?;
    eprintln!(
        "{}: naive average {naive_average}, lifted {lifted}",
        name.as_str()
    );
    Ok(ExitCode::SUCCESS)
}
