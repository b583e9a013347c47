//! Config file schema.
//!
//! ```json
//! {
//!   "command": "sweep",
//!   "problem": { "spectrum": { "kind": "power_law", "params": { "a": 2, "r": 1 }, "d": 2000 }, "sigma2": 1 },
//!   "params": { "n": 200, "algorithm": "ridge", "center": 0.12 },
//!   "output_dir": "out/sweep",
//!   "seed": 7,
//!   "trials": 20
//! }
//! ```

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gdrisk_core::{Algorithm, BoundConstants, EstimatorConfig, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Bounds,
    Simulate,
    Sweep,
    Rates,
    Compare,
    Separation,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Rates => "rates",
            Command::Compare => "compare",
            Command::Separation => "separation",
            Command::Validate => "validate",
        }
    }

    pub fn needs_problem(self) -> bool {
        matches!(self, Command::Bounds | Command::Simulate | Command::Sweep | Command::Compare)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Unreadable(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn params<T: for<'de> Deserialize<'de>>(command: Command, value: &serde_json::Value) -> Result<T, CliError> {
    let value = if value.is_null() { serde_json::Value::Object(Default::default()) } else { value.clone() };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid `params` for {}: {e}", command.name())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundRequest {
    Ridge {
        lambda: f64,
    },
    GdRidgeType {
        eta: Option<f64>,
        t: u64,
    },
    GdLower {
        eta: Option<f64>,
        t: u64,
    },
    GdSgdType {
        eta: Option<f64>,
        t: u64,
        #[serde(default = "yes")]
        gaussian: bool,
    },
    Sgd {
        eta0: Option<f64>,
    },
}

fn yes() -> bool {
    true
}

impl BoundRequest {
    pub fn name(&self) -> &'static str {
        match self {
            BoundRequest::Ridge { .. } => "ridge",
            BoundRequest::GdRidgeType { .. } => "gd_ridge_type",
            BoundRequest::GdLower { .. } => "gd_lower",
            BoundRequest::GdSgdType { .. } => "gd_sgd_type",
            BoundRequest::Sgd { .. } => "sgd",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    pub n: usize,
    pub requests: Vec<BoundRequest>,
    #[serde(default)]
    pub constants: BoundConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdMethod {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub n: usize,
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub sgd_method: SgdMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub n: usize,
    pub algorithm: Algorithm,
    /// Explicit grid: λ for ridge, t for GD, η₀ for SGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Log-spaced grid around `center` when `grid` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default = "default_span")]
    pub span: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// GD stepsize, default `1/(2 tr Σ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn default_span() -> f64 {
    100.0
}

fn default_points() -> usize {
    15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesParams {
    pub a: f64,
    pub r: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_rate_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub options: gdrisk_core::RateOptions,
}

fn default_rate_grid() -> Vec<usize> {
    vec![128, 256, 512, 1024, 2048]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompareParams {
    GdVsRidge {
        n: usize,
        lambda_grid: Vec<f64>,
        /// Default `1/(2 tr Σ)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default)]
        constants: BoundConstants,
    },
    GdVsSgd {
        n: usize,
        /// Default `{1/8, 1/4, 1/2, 1} / (4 tr Σ)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_grid: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationParams {
    #[serde(default = "default_separation_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_separation_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub options: gdrisk_core::SeparationOptions,
}

fn default_separation_grid() -> Vec<usize> {
    vec![64, 128, 256]
}

fn default_separation_sigma2() -> f64 {
    0.25
}

/// Command-specific parameters after defaults are filled in.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Params {
    Bounds(BoundsParams),
    Simulate(SimulateParams),
    Sweep(SweepParams),
    Rates(RatesParams),
    Compare(CompareParams),
    Separation(SeparationParams),
}

impl Params {
    pub fn parse(command: Command, value: &serde_json::Value) -> Result<Self, CliError> {
        Ok(match command {
            Command::Bounds => Params::Bounds(params(command, value)?),
            Command::Simulate => Params::Simulate(params(command, value)?),
            Command::Sweep => Params::Sweep(params(command, value)?),
            Command::Rates => Params::Rates(params(command, value)?),
            Command::Compare => Params::Compare(params(command, value)?),
            Command::Separation => Params::Separation(params(command, value)?),
            Command::Validate => return Err(CliError::Config("`validate` has no parameters of its own".into())),
        })
    }

    /// Sample size used to fill in problem defaults.
    pub fn n_hint(&self) -> Option<usize> {
        match self {
            Params::Bounds(p) => Some(p.n),
            Params::Simulate(p) => Some(p.n),
            Params::Sweep(p) => Some(p.n),
            Params::Compare(CompareParams::GdVsRidge { n, .. } | CompareParams::GdVsSgd { n, .. }) => Some(*n),
            Params::Rates(_) | Params::Separation(_) => None,
        }
    }
}

/// Everything a run needs, with file-level defaults filled in.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    pub params: Params,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub trials: usize,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

impl Resolved {
    pub fn new(command: Command, config: &RunConfig, overrides: &Overrides) -> Result<Self, CliError> {
        if let Some(named) = config.command {
            if named != command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    named.name(),
                    command.name()
                )));
            }
        }
        let params = Params::parse(command, &config.params)?;
        if command.needs_problem() && config.problem.is_none() {
            return Err(CliError::Config(format!("`{}` needs a `problem` section", command.name())));
        }
        let output_dir = overrides
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .ok_or_else(|| CliError::Config("no output directory: set `output_dir` or pass --out".into()))?;
        let seed =
            overrides.seed.or(config.seed).or(config.problem.as_ref().and_then(|p| p.seed)).unwrap_or(DEFAULT_SEED);
        let trials = overrides.trials.or(config.trials).unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        Ok(Self { command, problem: config.problem.clone(), params, output_dir, seed, trials })
    }
}
