//! Static checks on a config before anything runs.

use std::fmt;
use std::path::Path;

use gdrisk_core::experiments::{default_gd_stepsize, max_sgd_stepsize};
use gdrisk_core::{EstimatorConfig, ProblemInstance};
use serde::Serialize;

use crate::config::{BoundRequest, Command, CompareParams, Params, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Self { level: Level::Error, message: message.into() }
    }

    fn warning(message: impl Into<String>) -> Self {
        Self { level: Level::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.level {
            Level::Error => "error",
            Level::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.level == Level::Error)
}

/// Full check of a config file, used by `gdrisk validate`.
pub fn validate_file(path: &Path) -> Vec<Diagnostic> {
    let config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return vec![Diagnostic::error(e.to_string())],
    };
    let command = match config.command {
        Some(Command::Validate) | None => {
            return vec![Diagnostic::error("`command` must name the command to validate (bounds, simulate, ...)")]
        }
        Some(c) => c,
    };
    validate_config(command, &config)
}

pub fn validate_config(command: Command, config: &RunConfig) -> Vec<Diagnostic> {
    let params = match Params::parse(command, &config.params) {
        Ok(p) => p,
        Err(e) => return vec![Diagnostic::error(e.to_string())],
    };
    if config.trials == Some(0) {
        return vec![Diagnostic::error("trials must be at least 1")];
    }
    let problem = match &config.problem {
        Some(spec) => match spec.build(params.n_hint()) {
            Ok(p) => Some(p),
            Err(e) => return vec![Diagnostic::error(format!("problem: {e}"))],
        },
        None if command.needs_problem() => {
            return vec![Diagnostic::error(format!("`{}` needs a `problem` section", command.name()))]
        }
        None => None,
    };
    let mut out = static_errors(&params);
    if out.is_empty() {
        if let Some(p) = &problem {
            out.extend(warnings(&params, p));
        }
    }
    out
}

fn static_errors(params: &Params) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |r: gdrisk_core::Result<()>| {
        if let Err(e) = r {
            out.push(Diagnostic::error(e.to_string()));
        }
    };
    match params {
        Params::Bounds(p) => push(p.constants.validate()),
        Params::Compare(CompareParams::GdVsRidge { constants, .. }) => push(constants.validate()),
        Params::Simulate(p) => p.estimators.iter().for_each(|e| push(e.validate())),
        _ => {}
    }
    out
}

/// Settings that run but sit outside the regime where the guarantees apply.
pub fn warnings(params: &Params, problem: &ProblemInstance) -> Vec<Diagnostic> {
    let gd_cap = default_gd_stepsize(problem);
    let sgd_cap = max_sgd_stepsize(problem);
    let mut out = Vec::new();
    let gd = |eta: Option<f64>, out: &mut Vec<Diagnostic>| {
        if let Some(eta) = eta.filter(|&e| e > gd_cap * (1.0 + 1e-12)) {
            out.push(Diagnostic::warning(format!("GD stepsize {eta} exceeds 1/(2 tr Σ) = {gd_cap}")));
        }
    };
    let sgd = |eta0: f64, out: &mut Vec<Diagnostic>| {
        if eta0 > sgd_cap * (1.0 + 1e-12) {
            out.push(Diagnostic::warning(format!("SGD stepsize {eta0} exceeds 1/(4 tr Σ) = {sgd_cap}")));
        }
    };
    match params {
        Params::Bounds(p) => {
            for req in &p.requests {
                match *req {
                    BoundRequest::Sgd { eta0 } => {
                        if p.n < 100 {
                            out.push(Diagnostic::warning(format!(
                                "sgd bound: precondition n ≥ 100 fails (n = {})",
                                p.n
                            )));
                        }
                        if let Some(e) = eta0 {
                            sgd(e, &mut out);
                        }
                    }
                    BoundRequest::GdRidgeType { eta, .. }
                    | BoundRequest::GdLower { eta, .. }
                    | BoundRequest::GdSgdType { eta, .. } => gd(eta, &mut out),
                    BoundRequest::Ridge { .. } => {}
                }
            }
        }
        Params::Simulate(p) => {
            for e in &p.estimators {
                match *e {
                    EstimatorConfig::Gd { eta, .. } => gd(Some(eta), &mut out),
                    EstimatorConfig::Sgd { eta0 } => sgd(eta0, &mut out),
                    EstimatorConfig::Ridge { .. } => {}
                }
            }
        }
        Params::Sweep(p) => gd(p.eta, &mut out),
        Params::Compare(CompareParams::GdVsRidge { eta, .. }) => gd(*eta, &mut out),
        Params::Compare(CompareParams::GdVsSgd { eta_grid, .. }) => {
            eta_grid.iter().flatten().for_each(|&e| sgd(e, &mut out));
        }
        Params::Rates(_) | Params::Separation(_) => {}
    }
    out
}

/// Turn a `validate` error list into a single error.
pub fn into_result(diags: &[Diagnostic]) -> Result<(), CliError> {
    let errors: Vec<String> = diags.iter().filter(|d| d.level == Level::Error).map(|d| d.message.clone()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(errors.join("; ")))
    }
}
