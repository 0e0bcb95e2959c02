use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Exit status 2: the inputs were rejected before any computation.
/// Exit status 1: the computation or a verification failed.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Failed(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Failed(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "invalid input: {e:#}"),
            Failure::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn invalid(self) -> Outcome<T>;
    fn failed(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Outcome<T> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn failed(self) -> Outcome<T> {
        self.map_err(|e| Failure::Failed(e.into()))
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// Jump penalty α (> 0). Default 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fidelity weight β (≥ 0). Default 0.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Measurement g as SbvFunction JSON. Defaults to g ≡ 0.
    #[arg(long, value_name = "PATH")]
    pub g: Option<PathBuf>,
    /// Write the JSON report here in addition to stdout.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Render an SVG figure.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Verification tolerance. Default 1e-8.
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON file with defaults for alpha, beta, tol, seed and out_dir.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: Option<f64>,
    beta: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

/// Validated global settings. Flags override the config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(s: &Shared) -> Outcome<Self> {
        let file: ConfigFile = match &s.config {
            Some(p) => read_json(p, "config")?,
            None => ConfigFile::default(),
        };
        let cfg = RunConfig {
            alpha: s.alpha.or(file.alpha).unwrap_or(1.0),
            beta: s.beta.or(file.beta).unwrap_or(0.0),
            tol: s.tol.or(file.tol).unwrap_or(1e-8),
            seed: s.seed.or(file.seed).unwrap_or(0),
            out_dir: s.out_dir.clone().or(file.out_dir),
        };
        mslift::sbv::MsParams::new(cfg.alpha, cfg.beta).invalid()?;
        if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
            return Err(Failure::Invalid(anyhow!(
                "tol must be finite and > 0, got {}",
                cfg.tol
            )));
        }
        Ok(cfg)
    }

    pub fn output(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Parses a JSON file, naming the offending field path on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Outcome<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {what} file {}", path.display()))
        .invalid()?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        Failure::Invalid(anyhow!(
            "{} ({what}) at `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })?;
    de.end()
        .map_err(|e| Failure::Invalid(anyhow!("{} ({what}): {e}", path.display())))?;
    Ok(value)
}

pub fn write_text(path: &Path, text: &str) -> Outcome<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .failed()?;
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .failed()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
