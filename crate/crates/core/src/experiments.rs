//! Tuning sweeps, dominance comparisons, the spike separation and rate fits.
//!
//! Ridge and GD are always scored with the exact conditional oracle averaged
//! over design draws; every grid point sees the same draws. SGD uses the
//! exact recursion under Gaussian design and path Monte Carlo otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gd_lower_bound, power_law_exponent, ridge_bound, sgd_horizon, Algorithm};
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::linalg::{mean_and_stderr, pairwise_sum};
use crate::problem::{make_power_law_problem, make_spike_problem, BoundConstants, Design, ProblemInstance};
use crate::risk::{
    monte_carlo_risk, sgd_exact_risk_gaussian, DesignSummary, Filter, RiskEstimate, RiskMethod, T_INFINITY,
};
use crate::seed::derive_seed;

/// Sweep outcome: one risk per grid value and the argmin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub risks: Vec<RiskEstimate>,
    pub best_index: usize,
}

impl SweepResult {
    fn new(grid: Vec<f64>, risks: Vec<RiskEstimate>) -> Self {
        let best_index = argmin(risks.iter().map(|r| r.mean));
        Self { grid, risks, best_index }
    }

    pub fn best(&self) -> (f64, &RiskEstimate) {
        (self.grid[self.best_index], &self.risks[self.best_index])
    }

    pub fn at_edge(&self) -> bool {
        self.best_index == 0 || self.best_index + 1 == self.grid.len()
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Hyperparameter being tuned; the grid holds λ, t or η₀ respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum TuneTarget {
    Ridge,
    /// GD over stopping times with stepsize `eta` (default `1/(2 tr Σ)`),
    /// lowered per draw to the stability limit when needed.
    Gd {
        eta: Option<f64>,
    },
    Sgd,
}

/// `1/(2 tr Σ)`.
pub fn default_gd_stepsize(problem: &ProblemInstance) -> f64 {
    1.0 / (2.0 * problem.trace())
}

/// `1/(4 tr Σ)`.
pub fn max_sgd_stepsize(problem: &ProblemInstance) -> f64 {
    1.0 / (4.0 * problem.trace())
}

fn t_from(value: f64) -> Result<u64> {
    if value.is_infinite() && value > 0.0 {
        return Ok(T_INFINITY);
    }
    if !(value >= 0.0) {
        return Err(Error::InvalidArgument(format!("stopping time {value} must be nonnegative")));
    }
    Ok((value.round() as u64).min(T_INFINITY - 1))
}

/// Per-draw bias/variance for a list of filters chosen from the draw itself.
/// Returns `[draw][filter] -> (bias, variance)`.
fn conditional_draws<F>(problem: &ProblemInstance, n: usize, seeds: &[u64], filters: F) -> Result<Vec<Vec<(f64, f64)>>>
where
    F: Fn(&DesignSummary) -> Vec<Filter> + Sync,
{
    seeds
        .par_iter()
        .map(|&s| {
            let summary = DesignSummary::sample(problem, n, s)?;
            filters(&summary).into_iter().map(|f| summary.bias_variance(f)).collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn aggregate(per_draw: &[Vec<(f64, f64)>], column: usize) -> RiskEstimate {
    let totals: Vec<f64> = per_draw.iter().map(|r| r[column].0 + r[column].1).collect();
    let bs: Vec<f64> = per_draw.iter().map(|r| r[column].0).collect();
    let vs: Vec<f64> = per_draw.iter().map(|r| r[column].1).collect();
    let k = per_draw.len() as f64;
    let (_, stderr) = mean_and_stderr(&totals);
    let (bias, variance) = (pairwise_sum(&bs) / k, pairwise_sum(&vs) / k);
    RiskEstimate {
        mean: bias + variance,
        stderr,
        trials: per_draw.len(),
        method: RiskMethod::MonteCarlo,
        bias: Some(bias),
        variance: Some(variance),
    }
}

fn draw_seeds(seed: u64, cell: &[u64], trials: usize) -> Vec<u64> {
    (0..trials as u64)
        .map(|k| {
            let mut path = cell.to_vec();
            path.push(k);
            derive_seed(seed, &path)
        })
        .collect()
}

fn sgd_risk(problem: &ProblemInstance, n: usize, eta0: f64, trials: usize, seed: u64) -> Result<RiskEstimate> {
    match problem.design {
        Design::Gaussian => sgd_exact_risk_gaussian(problem, n, eta0),
        Design::Rademacher => monte_carlo_risk(problem, EstimatorConfig::Sgd { eta0 }, n, trials.max(2), seed),
    }
}

/// Evaluate every grid value with the cheapest exact oracle and pick the best.
pub fn tune_and_measure(
    problem: &ProblemInstance,
    target: TuneTarget,
    n: usize,
    grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid must be nonempty".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let risks = match target {
        TuneTarget::Sgd => grid
            .iter()
            .enumerate()
            .map(|(i, &eta0)| sgd_risk(problem, n, eta0, trials, derive_seed(seed, &[i as u64])))
            .collect::<Result<Vec<_>>>()?,
        TuneTarget::Ridge => {
            let filters: Vec<Filter> = grid.iter().map(|&lambda| Filter::Ridge { lambda }).collect();
            let per = conditional_draws(problem, n, &draw_seeds(seed, &[], trials), |_| filters.clone())?;
            (0..grid.len()).map(|j| aggregate(&per, j)).collect()
        }
        TuneTarget::Gd { eta } => {
            let eta = eta.unwrap_or_else(|| default_gd_stepsize(problem));
            let ts = grid.iter().map(|&t| t_from(t)).collect::<Result<Vec<_>>>()?;
            let per = conditional_draws(problem, n, &draw_seeds(seed, &[], trials), |s| {
                let e = eta.min(s.max_stable_stepsize());
                ts.iter().map(|&t| Filter::Gd { eta: e, t }).collect()
            })?;
            (0..grid.len()).map(|j| aggregate(&per, j)).collect()
        }
    };
    Ok(SweepResult::new(grid.to_vec(), risks))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Matched stopping time `⌈1/(ηλ)⌉`, infinite at `λ = 0`.
pub fn matched_stopping_time(eta: f64, lambda: f64) -> u64 {
    let t = (1.0 / (eta * lambda)).ceil();
    if !t.is_finite() || t >= (T_INFINITY - 1) as f64 {
        T_INFINITY
    } else {
        t as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeDominanceRow {
    pub lambda: f64,
    /// Matched stopping time at the nominal stepsize (`u64::MAX` for ∞).
    pub t: u64,
    pub ridge_risk: f64,
    pub gd_risk: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// Ridge's effective dimension is saturated (`D/n > 1/c₃`); GD is taken at `t = 0`.
    pub fallback: bool,
    /// Ratio statistics with the matched stopping time regardless of the fallback.
    pub matched_mean_ratio: f64,
    pub matched_max_ratio: f64,
    pub downgraded_draws: usize,
}

/// GD at `t = ⌈1/(ηλ)⌉` against ridge at `λ`, draw by draw.
pub fn dominance_gd_vs_ridge(
    problem: &ProblemInstance,
    n: usize,
    lambda_grid: &[f64],
    eta: f64,
    trials: usize,
    seed: u64,
    constants: &BoundConstants,
) -> Result<Vec<RidgeDominanceRow>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must be positive")));
    }
    if trials == 0 || lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("need at least one draw and one lambda".into()));
    }
    let fallback: Vec<bool> = lambda_grid
        .iter()
        .map(|&l| ridge_bound(problem, n, l, constants).map(|r| r.d_eff / n as f64 > 1.0 / constants.c3))
        .collect::<Result<_>>()?;
    let m = lambda_grid.len();
    let seeds = draw_seeds(seed, &[], trials);
    // [draw] -> (downgraded, [ridge, gd matched] per lambda)
    let per: Vec<(bool, Vec<(f64, f64)>)> = seeds
        .par_iter()
        .map(|&s| {
            let summary = DesignSummary::sample(problem, n, s)?;
            let lim = summary.max_stable_stepsize();
            let e = eta.min(lim);
            let mut row = Vec::with_capacity(m);
            for &lambda in lambda_grid {
                let (rb, rv) = summary.bias_variance(Filter::Ridge { lambda })?;
                let t = matched_stopping_time(e, lambda);
                let (gb, gv) = summary.bias_variance(Filter::Gd { eta: e, t })?;
                row.push((rb + rv, gb + gv));
            }
            Ok((e < eta, row))
        })
        .collect::<Result<_>>()?;
    let signal = problem.signal();
    let downgraded = per.iter().filter(|p| p.0).count();
    Ok((0..m)
        .map(|j| {
            let ridge: Vec<f64> = per.iter().map(|p| p.1[j].0).collect();
            let gd: Vec<f64> = per.iter().map(|p| p.1[j].1).collect();
            let matched: Vec<f64> = ridge.iter().zip(&gd).map(|(r, g)| ratio(*g, *r)).collect();
            let used: Vec<f64> =
                if fallback[j] { ridge.iter().map(|r| ratio(signal, *r)).collect() } else { matched.clone() };
            let k = trials as f64;
            let gd_mean = if fallback[j] { signal } else { pairwise_sum(&gd) / k };
            RidgeDominanceRow {
                lambda: lambda_grid[j],
                t: if fallback[j] { 0 } else { matched_stopping_time(eta, lambda_grid[j]) },
                ridge_risk: pairwise_sum(&ridge) / k,
                gd_risk: gd_mean,
                mean_ratio: pairwise_sum(&used) / k,
                max_ratio: used.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                fallback: fallback[j],
                matched_mean_ratio: pairwise_sum(&matched) / k,
                matched_max_ratio: matched.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                downgraded_draws: downgraded,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdDominanceRow {
    pub eta: f64,
    pub eta_admissible: bool,
    pub sgd_risk: f64,
    pub gd_eta: f64,
    pub gd_t: u64,
    pub gd_risk: f64,
    pub gd_stderr: f64,
    pub ratio: f64,
}

/// GD at `η = 1/(2 tr Σ)`, `t = ⌈4N⌉` against SGD at each `η`.
pub fn dominance_gd_vs_sgd(
    problem: &ProblemInstance,
    n: usize,
    eta_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SgdDominanceRow>> {
    if n < 2 || trials == 0 || eta_grid.is_empty() {
        return Err(Error::InvalidArgument("need n ≥ 2, trials ≥ 1 and a nonempty grid".into()));
    }
    let gd_eta = default_gd_stepsize(problem);
    let gd_t = (4.0 * sgd_horizon(n)).ceil() as u64;
    let sweep = tune_and_measure(problem, TuneTarget::Gd { eta: Some(gd_eta) }, n, &[gd_t as f64], trials, seed)?;
    let gd = sweep.risks[0];
    let cap = max_sgd_stepsize(problem);
    eta_grid
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let sgd = sgd_risk(problem, n, eta, trials, derive_seed(seed, &[u64::MAX, i as u64]))?;
            Ok(SgdDominanceRow {
                eta,
                eta_admissible: eta <= cap * (1.0 + 1e-10),
                sgd_risk: sgd.mean,
                gd_eta,
                gd_t,
                gd_risk: gd.mean,
                gd_stderr: gd.stderr,
                ratio: ratio(gd.mean, sgd.mean),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationOptions {
    /// Number of finite stopping times (log-spaced from 1 to n³); ∞ is always added.
    pub t_points: usize,
    /// Largest admissible `n · d`.
    pub memory_budget: usize,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self { t_points: 40, memory_budget: 1 << 27 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub n: usize,
    pub d: usize,
    pub ell_star: usize,
    pub gd_best_risk: f64,
    pub gd_stderr: f64,
    /// Best stopping time, `+∞` for the interpolating limit.
    pub gd_best_t: f64,
    pub sgd_eta: f64,
    pub sgd_risk: f64,
    pub gd_normalized: f64,
    pub sgd_normalized: f64,
    pub ratio: f64,
}

/// Log-spaced integer grid from `lo` to `hi`, deduplicated.
pub fn integer_log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(lo.max(1)) as f64).ln());
    let mut out: Vec<u64> = (0..points.max(1))
        .map(|i| {
            let f = if points > 1 { i as f64 / (points - 1) as f64 } else { 0.0 };
            (a + (b - a) * f).exp().round() as u64
        })
        .collect();
    out.dedup();
    out
}

/// Spike instances with `d = n²`: tuned GD against SGD at `η = 1/(4 tr Σ)`.
pub fn hard_instance_separation(
    n_grid: &[usize],
    sigma2: f64,
    trials: usize,
    seed: u64,
    options: &SeparationOptions,
) -> Result<Vec<SeparationRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 16) {
        return Err(Error::InvalidArgument(format!("every n must be at least 16, got {n}")));
    }
    for &n in n_grid {
        let requested = n.saturating_mul(n).saturating_mul(n);
        if requested > options.memory_budget {
            return Err(Error::MemoryBudget { requested, limit: options.memory_budget });
        }
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(cell, &n)| {
            let d = n * n;
            let problem = make_spike_problem(n, d, sigma2)?;
            let mut ts = integer_log_grid(1, (n as u64).pow(3), options.t_points);
            ts.push(T_INFINITY);
            let per = conditional_draws(&problem, n, &draw_seeds(seed, &[cell as u64], trials), |s| {
                let e = 0.5 * s.max_stable_stepsize();
                ts.iter().map(|&t| Filter::Gd { eta: e, t }).collect()
            })?;
            let risks: Vec<RiskEstimate> = (0..ts.len()).map(|j| aggregate(&per, j)).collect();
            let best = argmin(risks.iter().map(|r| r.mean));
            let eta_sgd = max_sgd_stepsize(&problem);
            let sgd = sgd_exact_risk_gaussian(&problem, n, eta_sgd)?;
            let ell = gd_lower_bound(&problem, n, 1.0, 1, &BoundConstants::default())?.ell_star.unwrap_or(0);
            let nf = n as f64;
            let gd = risks[best];
            Ok(SeparationRow {
                n,
                d,
                ell_star: ell,
                gd_best_risk: gd.mean,
                gd_stderr: gd.stderr,
                gd_best_t: if ts[best] == T_INFINITY { f64::INFINITY } else { ts[best] as f64 },
                sgd_eta: eta_sgd,
                sgd_risk: sgd.mean,
                gd_normalized: gd.mean * nf.powf(0.2),
                sgd_normalized: sgd.mean * nf / nf.ln(),
                ratio: ratio(gd.mean, sgd.mean),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least squares of `ln(risk)` on `ln(n)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("a rate fit needs at least 3 points".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive n and risk, got ({}, {})", p.0, p.1)));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (pairwise_sum(&xs) / m, pairwise_sum(&ys) / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (sse / (m - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, intercept, slope_stderr, points: points.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateOptions {
    /// Truncation length; `None` means `max(10 · max n, 1000)`.
    pub d: Option<usize>,
    pub grid_points: usize,
    /// Ratio between the largest and smallest grid value.
    pub span: f64,
    pub delta: f64,
    pub sigma2: f64,
    /// Times a grid may slide by half its span when the optimum sits on an edge.
    pub max_shifts: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { d: None, grid_points: 15, span: 100.0, delta: 0.1, sigma2: 1.0, max_shifts: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub n: usize,
    /// λ for ridge, ηt for GD, η₀ for SGD.
    pub best_param: f64,
    pub center: f64,
    pub risk: f64,
    pub stderr: f64,
    pub at_edge: bool,
    /// Optimum sits on the largest admissible SGD stepsize.
    pub at_cap: bool,
    pub shifts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub algorithm: Algorithm,
    pub a: f64,
    pub r: f64,
    pub theory: f64,
    pub fit: RateFit,
    /// Every optimum is interior (or on the SGD stepsize cap).
    pub valid: bool,
    pub cells: Vec<RateCell>,
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

fn centered_grid(center: f64, span: f64, points: usize) -> Vec<f64> {
    let half = span.sqrt();
    log_grid(center / half, center * half, points)
}

/// Tuned risk versus `n` for each algorithm and source exponent, with fitted slopes.
pub fn rate_table(
    a: f64,
    r_list: &[f64],
    algorithms: &[Algorithm],
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    options: &RateOptions,
) -> Result<Vec<RateRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if n_grid.len() < 3 || n_grid.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument("rate tables need at least 3 sample sizes, each ≥ 2".into()));
    }
    if options.grid_points < 3 || !(options.span > 1.0) {
        return Err(Error::InvalidArgument("grids need at least 3 points and span > 1".into()));
    }
    if algorithms.contains(&Algorithm::Minimax) {
        return Err(Error::InvalidArgument("minimax has a theory exponent only".into()));
    }
    let n_max = *n_grid.iter().max().unwrap();
    let d = options.d.unwrap_or((10 * n_max).max(1000));
    let half = options.span.sqrt();
    let mut rows = Vec::new();
    for (ri, &r) in r_list.iter().enumerate() {
        let problem = make_power_law_problem(a, r, d, options.sigma2, options.delta)?;
        let rho = 1.0 + 2.0 * a * r;
        let gd_eta = default_gd_stepsize(&problem);
        let sgd_cap = max_sgd_stepsize(&problem);
        let mut cells: Vec<Vec<RateCell>> = vec![Vec::new(); algorithms.len()];
        for (ni, &n) in n_grid.iter().enumerate() {
            let nf = n as f64;
            let seeds = draw_seeds(seed, &[ri as u64, ni as u64], trials);
            let conditional = |jobs: &[(Algorithm, &[f64])]| -> Result<Vec<Vec<RiskEstimate>>> {
                let per = conditional_draws(&problem, n, &seeds, |s| {
                    let e = gd_eta.min(s.max_stable_stepsize());
                    jobs.iter()
                        .flat_map(|&(alg, grid)| {
                            grid.iter().map(move |&p| match alg {
                                Algorithm::Ridge => Filter::Ridge { lambda: p },
                                _ => Filter::Gd { eta: e, t: (p / e).ceil() as u64 },
                            })
                        })
                        .collect()
                })?;
                let mut col = 0;
                Ok(jobs
                    .iter()
                    .map(|(_, grid)| {
                        let out = (col..col + grid.len()).map(|j| aggregate(&per, j)).collect();
                        col += grid.len();
                        out
                    })
                    .collect())
            };
            let stochastic = |grid: &[f64], shift: usize| -> Result<Vec<RiskEstimate>> {
                grid.iter()
                    .enumerate()
                    .map(|(j, &eta)| {
                        sgd_risk(
                            &problem,
                            n,
                            eta,
                            trials,
                            derive_seed(seed, &[ri as u64, ni as u64, shift as u64, j as u64]),
                        )
                    })
                    .collect()
            };
            let initial = |alg: Algorithm| -> (f64, Vec<f64>) {
                match alg {
                    Algorithm::Ridge => {
                        let c = nf.powf(-a / rho);
                        (c, centered_grid(c, options.span, options.grid_points))
                    }
                    Algorithm::Gd => {
                        let c = nf.powf(a / rho);
                        (c, centered_grid(c, options.span, options.grid_points))
                    }
                    _ => {
                        let c = sgd_horizon(n).powf(-(rho - a) / rho) * sgd_cap;
                        let hi = (c * half).min(sgd_cap);
                        (c.min(sgd_cap), log_grid(hi / options.span, hi, options.grid_points))
                    }
                }
            };
            let starts: Vec<(f64, Vec<f64>)> = algorithms.iter().map(|&alg| initial(alg)).collect();
            let shared: Vec<(Algorithm, &[f64])> = algorithms
                .iter()
                .zip(&starts)
                .filter(|(alg, _)| **alg != Algorithm::Sgd)
                .map(|(&alg, (_, g))| (alg, g.as_slice()))
                .collect();
            let mut first = if shared.is_empty() { Vec::new() } else { conditional(&shared)? }.into_iter();
            for (ai, &alg) in algorithms.iter().enumerate() {
                let (center, mut grid) = starts[ai].clone();
                let mut shifts = 0;
                loop {
                    let risks = match alg {
                        Algorithm::Sgd => stochastic(&grid, shifts)?,
                        _ if shifts == 0 => first.next().expect("shared evaluation"),
                        _ => conditional(&[(alg, &grid)])?.remove(0),
                    };
                    let sweep = SweepResult::new(grid.clone(), risks);
                    let last = grid.len() - 1;
                    let at_cap = alg == Algorithm::Sgd
                        && sweep.best_index == last
                        && (grid[last] - sgd_cap).abs() <= 1e-12 * sgd_cap;
                    let stuck = sweep.at_edge() && !at_cap;
                    if !stuck || shifts == options.max_shifts {
                        let (param, risk) = sweep.best();
                        cells[ai].push(RateCell {
                            n,
                            best_param: param,
                            center,
                            risk: risk.mean,
                            stderr: risk.stderr,
                            at_edge: sweep.at_edge(),
                            at_cap,
                            shifts,
                        });
                        break;
                    }
                    let factor = if sweep.best_index == 0 { 1.0 / half } else { half };
                    grid.iter_mut().for_each(|g| *g *= factor);
                    if alg == Algorithm::Sgd && grid[last] > sgd_cap {
                        grid = log_grid(sgd_cap / options.span, sgd_cap, options.grid_points);
                    }
                    shifts += 1;
                }
            }
        }
        for (ai, &alg) in algorithms.iter().enumerate() {
            let out = std::mem::take(&mut cells[ai]);
            let points: Vec<(f64, f64)> = out.iter().map(|c| (c.n as f64, c.risk)).collect();
            rows.push(RateRow {
                algorithm: alg,
                a,
                r,
                theory: power_law_exponent(alg, a, r)?,
                fit: rate_fit(&points)?,
                valid: out.iter().all(|c| !c.at_edge || c.at_cap),
                cells: out,
            });
        }
    }
    Ok(rows)
}
