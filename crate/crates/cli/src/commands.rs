//! One function per command, each producing its artifact set.
//!
//! `result.csv` column orders:
//!
//! | command | columns |
//! |---|---|
//! | bounds | kind, n, lambda, eta, t, eta0, k_star, ell_star, tilde_lambda, D, D1, N, bias_head, bias_tail, variance_term, eff_bias, eff_var, upper_total, lower_total, preconditions |
//! | simulate | algorithm, lambda, eta, t, eta0, n, trials, method, mean, stderr, bias, variance |
//! | sweep | algorithm, param, mean, stderr, bias, variance, best |
//! | rates | algorithm, a, r, theory, slope, slope_stderr, intercept, valid |
//! | compare (gd_vs_ridge) | lambda, t, ridge_risk, gd_risk, mean_ratio, max_ratio, fallback, matched_mean_ratio, matched_max_ratio, downgraded_draws |
//! | compare (gd_vs_sgd) | eta, eta_admissible, sgd_risk, gd_eta, gd_t, gd_risk, gd_stderr, ratio |
//! | separation | n, d, ell_star, gd_best_risk, gd_stderr, gd_best_t, sgd_eta, sgd_risk, gd_normalized, sgd_normalized, ratio |

use gdrisk_core::experiments::{default_gd_stepsize, max_sgd_stepsize, RateRow};
use gdrisk_core::{
    dominance_gd_vs_ridge, dominance_gd_vs_sgd, gd_lower_bound, gd_ridge_type_bound, gd_sgd_type_bound,
    hard_instance_separation, monte_carlo_risk, rate_table, ridge_bound, sgd_bound, sgd_exact_risk_gaussian,
    tune_and_measure, Algorithm, BoundReport, Design, EstimatorConfig, ProblemInstance, RiskMethod, TuneTarget,
};

use crate::config::{
    BoundRequest, BoundsParams, CompareParams, Params, RatesParams, Resolved, SeparationParams, SgdMethod,
    SimulateParams, SweepParams,
};
use crate::output::{flag, int, opt_real, plot_table, real, steps, Artifacts, Table};
use crate::CliError;

pub const BOUNDS_COLUMNS: &[&str] = &[
    "kind",
    "n",
    "lambda",
    "eta",
    "t",
    "eta0",
    "k_star",
    "ell_star",
    "tilde_lambda",
    "D",
    "D1",
    "N",
    "bias_head",
    "bias_tail",
    "variance_term",
    "eff_bias",
    "eff_var",
    "upper_total",
    "lower_total",
    "preconditions",
];

pub const SIMULATE_COLUMNS: &[&str] =
    &["algorithm", "lambda", "eta", "t", "eta0", "n", "trials", "method", "mean", "stderr", "bias", "variance"];

pub const SWEEP_COLUMNS: &[&str] = &["algorithm", "param", "mean", "stderr", "bias", "variance", "best"];

pub const RATES_COLUMNS: &[&str] = &["algorithm", "a", "r", "theory", "slope", "slope_stderr", "intercept", "valid"];

pub const RATE_CELL_COLUMNS: &[&str] =
    &["algorithm", "r", "n", "best_param", "center", "risk", "stderr", "at_edge", "at_cap", "shifts"];

pub const RIDGE_COMPARE_COLUMNS: &[&str] = &[
    "lambda",
    "t",
    "ridge_risk",
    "gd_risk",
    "mean_ratio",
    "max_ratio",
    "fallback",
    "matched_mean_ratio",
    "matched_max_ratio",
    "downgraded_draws",
];

pub const SGD_COMPARE_COLUMNS: &[&str] =
    &["eta", "eta_admissible", "sgd_risk", "gd_eta", "gd_t", "gd_risk", "gd_stderr", "ratio"];

pub const SEPARATION_COLUMNS: &[&str] = &[
    "n",
    "d",
    "ell_star",
    "gd_best_risk",
    "gd_stderr",
    "gd_best_t",
    "sgd_eta",
    "sgd_risk",
    "gd_normalized",
    "sgd_normalized",
    "ratio",
];

pub fn build_problem(run: &Resolved) -> Result<Option<ProblemInstance>, CliError> {
    match &run.problem {
        Some(spec) => Ok(Some(spec.build(run.params.n_hint())?)),
        None => Ok(None),
    }
}

pub fn execute(run: &Resolved, problem: Option<&ProblemInstance>) -> Result<Artifacts, CliError> {
    let need = || problem.ok_or_else(|| CliError::Config("a `problem` section is required".into()));
    match &run.params {
        Params::Bounds(p) => bounds(need()?, p),
        Params::Simulate(p) => simulate(need()?, p, run),
        Params::Sweep(p) => sweep(need()?, p, run),
        Params::Rates(p) => rates(p, run),
        Params::Compare(p) => compare(need()?, p, run),
        Params::Separation(p) => separation(p, run),
    }
}

fn gd_eta(problem: &ProblemInstance, eta: Option<f64>) -> f64 {
    eta.unwrap_or_else(|| default_gd_stepsize(problem))
}

pub fn bound_report(
    problem: &ProblemInstance,
    n: usize,
    req: &BoundRequest,
    p: &BoundsParams,
) -> Result<BoundReport, CliError> {
    let c = &p.constants;
    Ok(match *req {
        BoundRequest::Ridge { lambda } => ridge_bound(problem, n, lambda, c)?,
        BoundRequest::GdRidgeType { eta, t } => gd_ridge_type_bound(problem, n, gd_eta(problem, eta), t, c)?,
        BoundRequest::GdLower { eta, t } => gd_lower_bound(problem, n, gd_eta(problem, eta), t, c)?,
        BoundRequest::GdSgdType { eta, t, gaussian } => {
            gd_sgd_type_bound(problem, n, gd_eta(problem, eta), t, c, gaussian)?
        }
        BoundRequest::Sgd { eta0 } => sgd_bound(problem, n, eta0.unwrap_or_else(|| max_sgd_stepsize(problem)), c)?,
    })
}

fn bounds(problem: &ProblemInstance, p: &BoundsParams) -> Result<Artifacts, CliError> {
    p.constants.validate()?;
    let mut table = Table::new(BOUNDS_COLUMNS);
    let mut json = Vec::new();
    for req in &p.requests {
        let rep = bound_report(problem, p.n, req, p)?;
        let (lambda, eta, t, eta0) = match *req {
            BoundRequest::Ridge { lambda } => (Some(lambda), None, None, None),
            BoundRequest::GdRidgeType { eta, t }
            | BoundRequest::GdLower { eta, t }
            | BoundRequest::GdSgdType { eta, t, .. } => (None, Some(gd_eta(problem, eta)), Some(t), None),
            BoundRequest::Sgd { eta0 } => (None, None, None, Some(eta0.unwrap_or_else(|| max_sgd_stepsize(problem)))),
        };
        let pre: Vec<String> = rep.preconditions_met.iter().map(|c| format!("{}={}", c.name, c.met)).collect();
        table.push(vec![
            req.name().into(),
            int(p.n),
            opt_real(lambda),
            opt_real(eta),
            t.map(steps).unwrap_or_default(),
            opt_real(eta0),
            int(rep.k_star),
            rep.ell_star.map(int).unwrap_or_default(),
            real(rep.tilde_lambda),
            real(rep.d_eff),
            opt_real(rep.d1),
            opt_real(rep.horizon),
            real(rep.bias_head),
            real(rep.bias_tail),
            real(rep.variance_term),
            opt_real(rep.eff_bias),
            opt_real(rep.eff_var),
            real(rep.upper_total),
            opt_real(rep.lower_total),
            pre.join(";"),
        ]);
        let mut flat = rep.to_flat_json();
        flat["kind"] = req.name().into();
        json.push(flat);
    }
    let mut out = Artifacts::default();
    out.table("result.csv", table);
    out.json.push(("bounds.json".into(), serde_json::Value::Array(json)));
    Ok(out)
}

fn method_name(m: RiskMethod) -> &'static str {
    match m {
        RiskMethod::ExactConditional => "exact_conditional",
        RiskMethod::ExactRecursion => "exact_recursion",
        RiskMethod::FixedDesignClosedForm => "fixed_design_closed_form",
        RiskMethod::MonteCarlo => "monte_carlo",
    }
}

fn simulate(problem: &ProblemInstance, p: &SimulateParams, run: &Resolved) -> Result<Artifacts, CliError> {
    let mut table = Table::new(SIMULATE_COLUMNS);
    let mut plot = Vec::new();
    for (i, &cfg) in p.estimators.iter().enumerate() {
        cfg.validate()?;
        let seed = gdrisk_core::seed::derive_seed(run.seed, &[gdrisk_core::seed::stream::CELL, i as u64]);
        let est = match cfg {
            EstimatorConfig::Sgd { eta0 } if p.sgd_method == SgdMethod::Exact && problem.design == Design::Gaussian => {
                sgd_exact_risk_gaussian(problem, p.n, eta0)?
            }
            _ => monte_carlo_risk(problem, cfg, p.n, run.trials.max(2), seed)?,
        };
        let (alg, lambda, eta, t, eta0) = match cfg {
            EstimatorConfig::Ridge { lambda } => ("ridge", Some(lambda), None, None, None),
            EstimatorConfig::Gd { eta, t } => ("gd", None, Some(eta), Some(t), None),
            EstimatorConfig::Sgd { eta0 } => ("sgd", None, None, None, Some(eta0)),
        };
        table.push(vec![
            alg.into(),
            opt_real(lambda),
            opt_real(eta),
            t.map(steps).unwrap_or_default(),
            opt_real(eta0),
            int(p.n),
            int(est.trials),
            method_name(est.method).into(),
            real(est.mean),
            real(est.stderr),
            opt_real(est.bias),
            opt_real(est.variance),
        ]);
        plot.push((i as f64, est.mean, est.stderr));
    }
    let mut out = Artifacts::default();
    out.table("result.csv", table);
    out.table("plotdata_simulate.csv", plot_table(plot));
    Ok(out)
}

pub fn sweep_grid(p: &SweepParams) -> Result<Vec<f64>, CliError> {
    if let Some(g) = &p.grid {
        if g.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        return Ok(g.clone());
    }
    let center = p.center.ok_or_else(|| CliError::Config("sweep needs `grid` or `center`".into()))?;
    if !(center > 0.0 && p.span > 1.0 && p.points >= 1) {
        return Err(CliError::Config("sweep needs center > 0, span > 1 and points ≥ 1".into()));
    }
    let (lo, hi) = ((center / p.span.sqrt()).ln(), (center * p.span.sqrt()).ln());
    let mut grid: Vec<f64> = (0..p.points)
        .map(|i| {
            let f = if p.points > 1 { i as f64 / (p.points - 1) as f64 } else { 0.5 };
            (lo + (hi - lo) * f).exp()
        })
        .collect();
    if p.algorithm == Algorithm::Gd {
        grid.iter_mut().for_each(|t| *t = t.round());
        grid.dedup();
    }
    Ok(grid)
}

fn sweep(problem: &ProblemInstance, p: &SweepParams, run: &Resolved) -> Result<Artifacts, CliError> {
    let target = match p.algorithm {
        Algorithm::Ridge => TuneTarget::Ridge,
        Algorithm::Gd => TuneTarget::Gd { eta: p.eta },
        Algorithm::Sgd => TuneTarget::Sgd,
        Algorithm::Minimax => return Err(CliError::Config("minimax is not an estimator".into())),
    };
    let grid = sweep_grid(p)?;
    let result = tune_and_measure(problem, target, p.n, &grid, run.trials, run.seed)?;
    let mut table = Table::new(SWEEP_COLUMNS);
    let mut plot = Vec::new();
    for (i, (&g, r)) in result.grid.iter().zip(&result.risks).enumerate() {
        table.push(vec![
            p.algorithm.name().into(),
            real(g),
            real(r.mean),
            real(r.stderr),
            opt_real(r.bias),
            opt_real(r.variance),
            flag(i == result.best_index),
        ]);
        plot.push((g, r.mean, r.stderr));
    }
    let mut out = Artifacts::default();
    out.table("result.csv", table);
    out.table("plotdata_sweep.csv", plot_table(plot));
    Ok(out)
}

fn rates(p: &RatesParams, run: &Resolved) -> Result<Artifacts, CliError> {
    let rows: Vec<RateRow> = rate_table(p.a, &p.r, &p.algorithms, &p.n_grid, run.trials, run.seed, &p.options)?;
    let mut table = Table::new(RATES_COLUMNS);
    let mut cells = Table::new(RATE_CELL_COLUMNS);
    let mut out = Artifacts::default();
    for row in &rows {
        table.push(vec![
            row.algorithm.name().into(),
            real(row.a),
            real(row.r),
            real(row.theory),
            real(row.fit.slope),
            real(row.fit.slope_stderr),
            real(row.fit.intercept),
            flag(row.valid),
        ]);
        for c in &row.cells {
            cells.push(vec![
                row.algorithm.name().into(),
                real(row.r),
                int(c.n),
                real(c.best_param),
                real(c.center),
                real(c.risk),
                real(c.stderr),
                flag(c.at_edge),
                flag(c.at_cap),
                int(c.shifts),
            ]);
        }
        let plot = plot_table(row.cells.iter().map(|c| (c.n as f64, c.risk, c.stderr)));
        out.table(format!("plotdata_rates_{}_r{}.csv", row.algorithm.name(), row.r), plot);
    }
    out.tables.insert(0, ("result.csv".into(), table));
    out.tables.insert(1, ("rate_cells.csv".into(), cells));
    Ok(out)
}

fn compare(problem: &ProblemInstance, p: &CompareParams, run: &Resolved) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::default();
    match p {
        CompareParams::GdVsRidge { n, lambda_grid, eta, constants } => {
            constants.validate()?;
            let eta = gd_eta(problem, *eta);
            let rows = dominance_gd_vs_ridge(problem, *n, lambda_grid, eta, run.trials, run.seed, constants)?;
            let mut table = Table::new(RIDGE_COMPARE_COLUMNS);
            for r in &rows {
                table.push(vec![
                    real(r.lambda),
                    steps(r.t),
                    real(r.ridge_risk),
                    real(r.gd_risk),
                    real(r.mean_ratio),
                    real(r.max_ratio),
                    flag(r.fallback),
                    real(r.matched_mean_ratio),
                    real(r.matched_max_ratio),
                    int(r.downgraded_draws),
                ]);
            }
            out.table("result.csv", table);
            out.table("plotdata_compare_max_ratio.csv", plot_table(rows.iter().map(|r| (r.lambda, r.max_ratio, 0.0))));
            out.table(
                "plotdata_compare_mean_ratio.csv",
                plot_table(rows.iter().map(|r| (r.lambda, r.mean_ratio, 0.0))),
            );
        }
        CompareParams::GdVsSgd { n, eta_grid } => {
            let cap = max_sgd_stepsize(problem);
            let grid = eta_grid.clone().unwrap_or_else(|| vec![cap / 8.0, cap / 4.0, cap / 2.0, cap]);
            let rows = dominance_gd_vs_sgd(problem, *n, &grid, run.trials, run.seed)?;
            let mut table = Table::new(SGD_COMPARE_COLUMNS);
            for r in &rows {
                table.push(vec![
                    real(r.eta),
                    flag(r.eta_admissible),
                    real(r.sgd_risk),
                    real(r.gd_eta),
                    steps(r.gd_t),
                    real(r.gd_risk),
                    real(r.gd_stderr),
                    real(r.ratio),
                ]);
            }
            out.table("result.csv", table);
            out.table("plotdata_compare_ratio.csv", plot_table(rows.iter().map(|r| (r.eta, r.ratio, 0.0))));
        }
    }
    Ok(out)
}

fn separation(p: &SeparationParams, run: &Resolved) -> Result<Artifacts, CliError> {
    let rows = hard_instance_separation(&p.n_grid, p.sigma2, run.trials, run.seed, &p.options)?;
    let mut table = Table::new(SEPARATION_COLUMNS);
    for r in &rows {
        table.push(vec![
            int(r.n),
            int(r.d),
            int(r.ell_star),
            real(r.gd_best_risk),
            real(r.gd_stderr),
            real(r.gd_best_t),
            real(r.sgd_eta),
            real(r.sgd_risk),
            real(r.gd_normalized),
            real(r.sgd_normalized),
            real(r.ratio),
        ]);
    }
    let mut out = Artifacts::default();
    out.table("result.csv", table);
    out.table("plotdata_separation_gd.csv", plot_table(rows.iter().map(|r| (r.n as f64, r.gd_best_risk, r.gd_stderr))));
    out.table("plotdata_separation_sgd.csv", plot_table(rows.iter().map(|r| (r.n as f64, r.sgd_risk, 0.0))));
    Ok(out)
}
