use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mslift::currents::GraphCombination;
use mslift::decompose::{decompose, Decomposition};
use mslift::lift::{certify_minimality, evaluate, LiftError, LiftParams};
use mslift::sbv::{
    dirichlet_integral, fidelity_integral, ms_energy, Domain, Interval, Jump, Measurement,
    SbvFunction, DIRICHLET_CONVENTION,
};
use mslift::solver::{
    brute_force_solve, perturb_inside_on_grid, solve, DirichletSpec, MinimizeSummary, SolverError,
};

use crate::config::{
    read_json, to_json, write_text, Classify, Failure, Outcome, RunConfig, Shared,
};
use crate::demo::{run_demo, DemoName};
use crate::plot::{render, Panel};

#[derive(Debug, Parser)]
#[command(
    name = "mslift",
    version,
    about = "One-dimensional Mumford-Shah energies, their convex lift on graph combinations, decompositions and minimality certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct CombinationInput {
    /// GraphCombination JSON.
    #[arg(long, value_name = "PATH")]
    pub combo: Option<PathBuf>,
    /// A single SbvFunction JSON, read as the graph with weight 1.
    #[arg(long, value_name = "PATH")]
    pub func: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mumford-Shah energy of one function.
    Eval {
        #[arg(long, value_name = "PATH")]
        func: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
    /// Lifted energy of a weighted combination of graphs, column by column.
    Lift {
        #[command(flatten)]
        input: CombinationInput,
        /// Column profiles as CSV rows `x,lo,hi,level`.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Rewrites a combination as single graphs carrying the lifted energy.
    Decompose {
        #[command(flatten)]
        input: CombinationInput,
        #[command(flatten)]
        shared: Shared,
    },
    /// Discrete minimizer for the measurement given by --g.
    Minimize {
        /// Number of grid nodes.
        #[arg(long, default_value_t = 65)]
        n: usize,
        /// Boundary data (DirichletSpec JSON); the grid then covers the inner interval.
        #[arg(long, value_name = "PATH")]
        dirichlet: Option<PathBuf>,
        /// Write the minimizer as SbvFunction JSON.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Enumerate all cut sets instead of running the dynamic program.
        #[arg(long)]
        brute_force: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Checks F(u) <= G(T) for competitors T that agree with u outside the inner interval.
    Certify {
        #[arg(long, value_name = "PATH")]
        func: PathBuf,
        /// Inner interval as `A,B`.
        #[arg(long, value_parser = parse_pair, value_name = "A,B")]
        inner: (f64, f64),
        /// JSON array of GraphCombination; generated from --seed when absent.
        #[arg(long, value_name = "PATH")]
        competitors: Option<PathBuf>,
        /// Number of generated competitors.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Generated competitors live on this many uniform nodes of the inner
        /// interval. Without it they use the nodes of u.
        #[arg(long)]
        grid_nodes: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Built-in examples.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        #[command(flatten)]
        shared: Shared,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn run(cli: Cli) -> Outcome<ExitCode> {
    match cli.command {
        Command::Eval { func, shared } => cmd_eval(&func, &shared),
        Command::Lift { input, csv, shared } => cmd_lift(&input, csv.as_deref(), &shared),
        Command::Decompose { input, shared } => cmd_decompose(&input, &shared),
        Command::Minimize {
            n,
            dirichlet,
            out,
            brute_force,
            shared,
        } => cmd_minimize(
            n,
            dirichlet.as_deref(),
            out.as_deref(),
            brute_force,
            &shared,
        ),
        Command::Certify {
            func,
            inner,
            competitors,
            count,
            grid_nodes,
            shared,
        } => cmd_certify(
            &func,
            inner,
            competitors.as_deref(),
            count,
            grid_nodes,
            &shared,
        ),
        Command::Demo { name, shared } => {
            let cfg = RunConfig::resolve(&shared)?;
            run_demo(name, &cfg, &shared)
        }
    }
}

/// Prints `report` and stores it at `--report` when given.
pub fn emit<T: Serialize>(report: &T, cfg: &RunConfig, shared: &Shared) -> Outcome<()> {
    let text = to_json(report);
    if let Some(p) = &shared.report {
        write_text(&cfg.output(p), &text)?;
    }
    print!("{text}");
    Ok(())
}

pub fn emit_plot(panels: &[Panel], cfg: &RunConfig, shared: &Shared) -> Outcome<()> {
    match &shared.plot {
        Some(p) => write_text(&cfg.output(p), &render(panels)),
        None => Ok(()),
    }
}

fn load_g(shared: &Shared, iv: Interval) -> Outcome<Measurement> {
    let g = match &shared.g {
        Some(p) => read_json::<Measurement>(p, "measurement")?,
        None => return Ok(SbvFunction::constant(iv, 0.0)),
    };
    if !g.interval().same_as(&iv) {
        return Err(Failure::Invalid(anyhow!(
            "measurement lives on ({}, {}) but the input is on ({}, {})",
            g.interval().a,
            g.interval().b,
            iv.a,
            iv.b
        )));
    }
    Ok(g)
}

fn load_combination(input: &CombinationInput) -> Outcome<GraphCombination> {
    let t = match (&input.combo, &input.func) {
        (Some(p), _) => read_json::<GraphCombination>(p, "combination")?,
        (None, Some(p)) => GraphCombination::graph(read_json(p, "function")?),
        (None, None) => unreachable!("clap enforces one input"),
    };
    if t.is_empty() {
        return Err(Failure::Invalid(anyhow!("the combination has no terms")));
    }
    Ok(t)
}

fn lift_params(cfg: &RunConfig, g: Measurement) -> Outcome<LiftParams> {
    LiftParams::new(cfg.alpha, cfg.beta, g).invalid()
}

fn graph_panel(title: &str, t: &GraphCombination, name: &str) -> Panel {
    let mut panel = Panel::new(title);
    for (i, term) in t.terms().iter().enumerate() {
        panel = panel.curve(
            term.func.clone(),
            term.weight,
            format!("{name}{} (weight {})", i + 1, term.weight),
        );
    }
    panel
}

#[derive(Debug, Serialize)]
struct EvalReport {
    total: f64,
    dirichlet: f64,
    fidelity: f64,
    singular: f64,
    jump_count: usize,
    jumps: Vec<Jump>,
    alpha: f64,
    beta: f64,
    dirichlet_term: &'static str,
}

fn cmd_eval(func: &Path, shared: &Shared) -> Outcome<ExitCode> {
    let cfg = RunConfig::resolve(shared)?;
    let u: SbvFunction = read_json(func, "function")?;
    let g = load_g(shared, u.interval())?;
    let p = lift_params(&cfg, g)?;
    let jumps = u.jump_set();
    let report = EvalReport {
        total: ms_energy(&u, &p.g, &p.ms).failed()?,
        dirichlet: dirichlet_integral(&u),
        fidelity: cfg.beta * fidelity_integral(&u, &p.g).failed()?,
        singular: cfg.alpha * jumps.len() as f64,
        jump_count: jumps.len(),
        jumps,
        alpha: cfg.alpha,
        beta: cfg.beta,
        dirichlet_term: DIRICHLET_CONVENTION,
    };
    emit(&report, &cfg, shared)?;
    emit_plot(
        &[Panel::new("u and g")
            .curve(u, 1.0, "u")
            .curve(p.g, 0.5, "g")],
        &cfg,
        shared,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_lift(input: &CombinationInput, csv: Option<&Path>, shared: &Shared) -> Outcome<ExitCode> {
    let cfg = RunConfig::resolve(shared)?;
    let t = load_combination(input)?;
    let p = lift_params(&cfg, load_g(shared, t.interval().expect("non-empty"))?)?;
    let report = evaluate(&t, &p).failed()?;
    emit(&report, &cfg, shared)?;
    if let Some(path) = csv {
        let mut text = String::from("x,lo,hi,level\n");
        for c in &report.columns {
            for row in c.profile.csv_rows() {
                text.push_str(&row);
                text.push('\n');
            }
        }
        write_text(&cfg.output(path), &text)?;
    }
    let mut panel = graph_panel("combination", &t, "u");
    panel.columns = report.columns.iter().map(|c| c.x).collect();
    emit_plot(&[panel], &cfg, shared)?;
    Ok(ExitCode::SUCCESS)
}

pub fn parts_panel(title: &str, d: &Decomposition) -> Panel {
    let mut panel = Panel::new(title);
    for (i, part) in d.parts.iter().enumerate() {
        panel = panel.curve(
            part.func.clone(),
            part.mu,
            format!("w{} (weight {})", i + 1, part.mu),
        );
    }
    panel
}

fn cmd_decompose(input: &CombinationInput, shared: &Shared) -> Outcome<ExitCode> {
    let cfg = RunConfig::resolve(shared)?;
    let t = load_combination(input)?;
    let p = lift_params(&cfg, load_g(shared, t.interval().expect("non-empty"))?)?;
    let d = decompose(&t, &p).failed()?;
    emit(&d, &cfg, shared)?;
    emit_plot(
        &[graph_panel("before", &t, "u"), parts_panel("after", &d)],
        &cfg,
        shared,
    )?;
    let ok = d.checks.current_equal && d.checks.energy_gap <= cfg.tol * (1.0 + d.lifted_energy);
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn solver_failure(e: SolverError) -> Failure {
    match e {
        SolverError::Singular { .. } => Failure::Failed(e.into()),
        _ => Failure::Invalid(e.into()),
    }
}

fn cmd_minimize(
    n: usize,
    dirichlet: Option<&Path>,
    out: Option<&Path>,
    brute_force: bool,
    shared: &Shared,
) -> Outcome<ExitCode> {
    let cfg = RunConfig::resolve(shared)?;
    let gpath = shared
        .g
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow!("minimize needs the measurement --g")))?;
    let g: Measurement = read_json(gpath, "measurement")?;
    let spec: Option<DirichletSpec> = dirichlet
        .map(|p| read_json(p, "boundary data"))
        .transpose()?;
    let p = lift_params(&cfg, g)?;
    let start = Instant::now();
    let sol = if brute_force {
        brute_force_solve(&p.g, &p.ms, spec.as_ref(), n)
    } else {
        solve(&p.g, &p.ms, spec.as_ref(), n)
    }
    .map_err(solver_failure)?;
    let summary = MinimizeSummary::new(&sol, start.elapsed().as_secs_f64() * 1e3);
    if let Some(path) = out {
        write_text(&cfg.output(path), &to_json(&sol.u))?;
    }
    emit(&summary, &cfg, shared)?;
    let mut panel = Panel::new("minimizer")
        .curve(sol.u, 1.0, "u")
        .curve(p.g, 0.5, "g");
    panel.columns = summary.jumps.clone();
    emit_plot(&[panel], &cfg, shared)?;
    Ok(ExitCode::SUCCESS)
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_certify(
    func: &Path,
    inner: (f64, f64),
    competitors: Option<&Path>,
    count: usize,
    grid_nodes: Option<usize>,
    shared: &Shared,
) -> Outcome<ExitCode> {
    let cfg = RunConfig::resolve(shared)?;
    let u: SbvFunction = read_json(func, "function")?;
    let iv = u.interval();
    let d = Domain::new(iv.a, iv.b, inner.0, inner.1).invalid()?;
    let p = lift_params(&cfg, load_g(shared, iv)?)?;
    let comps: Vec<GraphCombination> = match competitors {
        Some(path) => read_json(path, "competitors")?,
        None => {
            let grid = match grid_nodes {
                Some(n) if n < 2 => {
                    return Err(Failure::Invalid(anyhow!(
                        "--grid-nodes needs at least 2 nodes"
                    )))
                }
                Some(n) => uniform(d.inner_a, d.inner_b, n),
                None => u.breakpoints(),
            };
            perturb_inside_on_grid(&u, &d, &grid, cfg.seed, count)
        }
    };
    for (id, t) in comps.iter().enumerate() {
        if t.interval().is_some_and(|i| !i.same_as(&iv)) {
            return Err(Failure::Invalid(anyhow!(
                "competitor {id} lives on another interval"
            )));
        }
        if (t.total_weight() - 1.0).abs() > 1e-9 {
            return Err(Failure::Invalid(anyhow!(
                "competitor {id}: weights sum to {}, expected 1",
                t.total_weight()
            )));
        }
    }
    let report = certify_minimality(&u, &p, &d, &comps, cfg.tol).map_err(|e| match e {
        LiftError::BoundaryMismatch { .. } => Failure::Invalid(e.into()),
        _ => Failure::Failed(e.into()),
    })?;
    emit(&report, &cfg, shared)?;
    let worst = report
        .certificates
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .map(|c| c.competitor_id);
    let mut panels = vec![Panel::new("u").curve(u, 1.0, "u")];
    if let Some(id) = worst {
        let mut panel = graph_panel(&format!("competitor {id}"), &comps[id], "v");
        panel.columns = vec![d.inner_a, d.inner_b];
        panels.push(panel);
    }
    emit_plot(&panels, &cfg, shared)?;
    if report.all_certified() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "not certified: minimum margin {} below -{}",
            report.min_margin().unwrap_or(f64::NAN),
            cfg.tol
        );
        Ok(ExitCode::from(1))
    }
}
