//! Excess-risk oracles.
//!
//! Ridge and GD are both spectral filters of the sample Gram matrix
//! `A = X Xᵀ = U diag(μ) Uᵀ`: the estimate is `Xᵀ U Φ Uᵀ y` with
//! `φ(μ) = 1/(μ + nλ)` for ridge and `φ(μ) = (1 − (1 − ημ/n)ᵗ)/μ` for GD.
//! Given `X`, the expected excess risk over Gaussian noise only needs
//!
//! * `z = Uᵀ X w*`, `q = Uᵀ X Σ w*`,
//! * `K = Uᵀ X Σ Xᵀ U`,
//!
//! after which `bias = ‖w*‖²_Σ − 2 (Φz)ᵀq + (Φz)ᵀ K (Φz)` and
//! `variance = σ² Σⱼ φⱼ² Kⱼⱼ`. These are collected once per design in a
//! [`DesignSummary`] and reused across every hyperparameter.
//!
//! For SGD under Gaussian design the diagonal of the error second moment
//! obeys a closed recursion. Off-diagonal entries never feed back into the
//! diagonal, so starting from `diag(w*²)` is exact.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{check_stepsize, gd_analytic, ridge_fit, sgd_run, sgd_schedule, EstimatorConfig};
use crate::linalg::{self, gram_cutoff, mean_and_stderr, mul, one_minus_pow, pairwise_sum, pow_one_minus};
use crate::problem::{draw_coordinate, draw_noise, sample_dataset, Design, ProblemInstance};
use crate::seed::{derive_seed, rng_from, stream};

/// Stopping time standing for `t → ∞`.
pub const T_INFINITY: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    ExactConditional,
    ExactRecursion,
    FixedDesignClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub method: RiskMethod,
    pub bias: Option<f64>,
    pub variance: Option<f64>,
}

impl RiskEstimate {
    fn exact(method: RiskMethod, bias: f64, variance: f64) -> Self {
        Self { mean: bias + variance, stderr: 0.0, trials: 1, method, bias: Some(bias), variance: Some(variance) }
    }
}

/// `Σᵢ λᵢ (wᵢ − w*ᵢ)²`.
pub fn excess_risk(w: &[f64], problem: &ProblemInstance) -> Result<f64> {
    if w.len() != problem.d() {
        return Err(Error::DimensionMismatch { expected: problem.d(), got: w.len() });
    }
    let terms: Vec<f64> = problem
        .eigenvalues()
        .iter()
        .zip(w.iter().zip(&problem.wstar))
        .map(|(l, (a, b))| l * (a - b) * (a - b))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Spectral filter of ridge or GD on the Gram eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    Ridge { lambda: f64 },
    Gd { eta: f64, t: u64 },
}

impl Filter {
    fn apply(&self, mu: f64, n: f64) -> f64 {
        match *self {
            Filter::Ridge { lambda } => 1.0 / (mu + n * lambda),
            Filter::Gd { t: 0, .. } => 0.0,
            Filter::Gd { t: T_INFINITY, .. } => 1.0 / mu,
            Filter::Gd { eta, t } => one_minus_pow(eta * mu / n, t) / mu,
        }
    }
}

/// Per-design sufficient statistics for the conditional ridge/GD oracles.
#[derive(Debug, Clone)]
pub struct DesignSummary {
    n: usize,
    d: usize,
    mu: Vec<f64>,
    k: Mat<f64>,
    z: Vec<f64>,
    q: Vec<f64>,
    signal: f64,
    sigma2: f64,
}

const BLOCK: usize = 256;
const BIAS_FLOOR: f64 = 1e-13;

impl DesignSummary {
    /// Summary of a dataset drawn from `problem` (same `d`, `X` in the eigenbasis).
    pub fn from_dataset(problem: &ProblemInstance, ds: &Dataset) -> Result<Self> {
        if ds.d() != problem.d() {
            return Err(Error::DimensionMismatch { expected: problem.d(), got: ds.d() });
        }
        let (n, d) = (ds.n(), ds.d());
        let lam = problem.eigenvalues();
        let svd = ds.svd()?;
        let r = svd.rank();
        let s = svd.singular_values();
        let mu: Vec<f64> = s.iter().map(|s| s * s).collect();
        // Xᵀ U = V S, so every quantity is a d-space inner product
        let v = svd.v();
        let w = Mat::<f64>::from_fn(d, r, |i, j| lam[i].sqrt() * v[(i, j)] * s[j]);
        let mut k = Mat::<f64>::zeros(r, r);
        linalg::gram_accumulate(&mut k, w.transpose(), None);
        linalg::mirror_lower(&mut k);
        let vw = linalg::mat_t_vec(v, &problem.wstar);
        let lw: Vec<f64> = lam.iter().zip(&problem.wstar).map(|(l, w)| l * w).collect();
        let vlw = linalg::mat_t_vec(v, &lw);
        let z = vw.iter().zip(s).map(|(a, s)| a * s).collect();
        let q = vlw.iter().zip(s).map(|(a, s)| a * s).collect();
        Ok(Self { n, d, mu, k, z, q, signal: problem.signal(), sigma2: problem.sigma2 })
    }

    /// Summary of the design `sample_dataset(problem, n, seed)` would draw.
    /// When `n ≤ d` the design is streamed in column blocks and never stored.
    pub fn sample(problem: &ProblemInstance, n: usize, seed: u64) -> Result<Self> {
        let d = problem.d();
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if n > d {
            return Self::from_dataset(problem, &sample_dataset(problem, n, seed)?);
        }
        let lam = problem.eigenvalues();
        let mut rng = rng_from(seed, &[stream::DESIGN]);
        let mut a = Mat::<f64>::zeros(n, n);
        let mut b = Mat::<f64>::zeros(n, n);
        let mut xw = vec![0.0; n];
        let mut xlw = vec![0.0; n];
        let mut j0 = 0;
        while j0 < d {
            let bs = BLOCK.min(d - j0);
            let mut xb = Mat::<f64>::zeros(n, bs);
            for jj in 0..bs {
                let sl = lam[j0 + jj].sqrt();
                for i in 0..n {
                    xb[(i, jj)] = sl * draw_coordinate(&mut rng, problem.design);
                }
            }
            linalg::gram_accumulate(&mut a, xb.as_ref(), None);
            linalg::gram_accumulate(&mut b, xb.as_ref(), Some(&lam[j0..j0 + bs]));
            for jj in 0..bs {
                let (w, l) = (problem.wstar[j0 + jj], lam[j0 + jj]);
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    xw[i] += xb[(i, jj)] * w;
                    xlw[i] += xb[(i, jj)] * l * w;
                }
            }
            j0 += bs;
        }
        linalg::mirror_lower(&mut b);
        let (mu_all, vecs) = linalg::sym_eigen_desc(a.as_ref())?;
        let floor = gram_cutoff(n, d, mu_all[0].max(0.0));
        let r = mu_all.iter().take_while(|&&m| m > floor && m > 0.0).count();
        let u = vecs.as_ref().subcols(0, r);
        let bu = mul(b.as_ref(), u);
        let k = mul(u.transpose(), bu.as_ref());
        let z = linalg::mat_t_vec(u, &xw);
        let q = linalg::mat_t_vec(u, &xlw);
        Ok(Self { n, d, mu: mu_all[..r].to_vec(), k, z, q, signal: problem.signal(), sigma2: problem.sigma2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.mu.len()
    }

    /// Nonzero Gram eigenvalues, nonincreasing.
    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    /// `n / ‖X Xᵀ‖`.
    pub fn max_stable_stepsize(&self) -> f64 {
        match self.mu.first() {
            Some(&top) if top > 0.0 => self.n as f64 / top,
            _ => f64::INFINITY,
        }
    }

    /// Conditional bias and variance of a filter; the stepsize is checked for GD.
    pub fn bias_variance(&self, filter: Filter) -> Result<(f64, f64)> {
        if let Filter::Gd { eta, .. } = filter {
            check_stepsize(eta, self.max_stable_stepsize())?;
        }
        if let Filter::Ridge { lambda } = filter {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidArgument(format!("lambda = {lambda} must be nonnegative")));
            }
        }
        let n = self.n as f64;
        let r = self.rank();
        let phi: Vec<f64> = self.mu.iter().map(|&m| filter.apply(m, n)).collect();
        let c: Vec<f64> = phi.iter().zip(&self.z).map(|(p, z)| p * z).collect();
        let mut kc = vec![0.0; r];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            for (o, &kij) in kc.iter_mut().zip(self.k.col(j).iter()) {
                *o += kij * cj;
            }
        }
        let cross: Vec<f64> = c.iter().zip(&self.q).map(|(a, b)| a * b).collect();
        let quad: Vec<f64> = c.iter().zip(&kc).map(|(a, b)| a * b).collect();
        let raw = self.signal - 2.0 * pairwise_sum(&cross) + pairwise_sum(&quad);
        let bias = if raw <= BIAS_FLOOR * self.signal { 0.0 } else { raw };
        let var_terms: Vec<f64> = phi.iter().enumerate().map(|(j, p)| p * p * self.k[(j, j)]).collect();
        let variance = self.sigma2 * pairwise_sum(&var_terms);
        Ok((bias, variance))
    }

    pub fn risk(&self, filter: Filter) -> Result<RiskEstimate> {
        let (b, v) = self.bias_variance(filter)?;
        Ok(RiskEstimate::exact(RiskMethod::ExactConditional, b, v))
    }
}

/// `E[‖w_t − w*‖²_Σ | X]` for GD.
pub fn gd_conditional_risk(ds: &Dataset, problem: &ProblemInstance, eta: f64, t: u64) -> Result<RiskEstimate> {
    DesignSummary::from_dataset(problem, ds)?.risk(Filter::Gd { eta, t })
}

/// `E[‖ŵ_λ − w*‖²_Σ | X]` for ridge.
pub fn ridge_conditional_risk(ds: &Dataset, problem: &ProblemInstance, lambda: f64) -> Result<RiskEstimate> {
    DesignSummary::from_dataset(problem, ds)?.risk(Filter::Ridge { lambda })
}

/// Diagonal second-moment recursion, returning `Σ λᵢ Bᵢᵢ` after the schedule.
fn sgd_recursion(lam: &[f64], b0: &[f64], sigma2: f64, schedule: &[f64]) -> f64 {
    let mut b = b0.to_vec();
    let mut terms: Vec<f64> = lam.iter().zip(&b).map(|(l, b)| l * b).collect();
    for &eta in schedule {
        let total = pairwise_sum(&terms);
        let e2 = eta * eta;
        for ((bi, ti), &l) in b.iter_mut().zip(terms.iter_mut()).zip(lam) {
            let shrink = (1.0 - eta * l) * (1.0 - eta * l);
            *bi = shrink * *bi + e2 * l * (l * *bi + total) + e2 * sigma2 * l;
            *ti = l * *bi;
        }
    }
    pairwise_sum(&terms)
}

/// Exact expected excess risk of the last SGD iterate under Gaussian design.
pub fn sgd_exact_risk_gaussian(problem: &ProblemInstance, n: usize, eta0: f64) -> Result<RiskEstimate> {
    if problem.design != Design::Gaussian {
        return Err(Error::InvalidArgument("the exact SGD recursion needs a Gaussian design".into()));
    }
    if !(eta0 >= 0.0 && eta0.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta0 = {eta0} must be finite and nonnegative")));
    }
    let lam = problem.eigenvalues();
    let schedule = sgd_schedule(n, eta0);
    let w2: Vec<f64> = problem.wstar.iter().map(|w| w * w).collect();
    let bias = sgd_recursion(lam, &w2, 0.0, &schedule);
    let variance =
        if problem.sigma2 > 0.0 { sgd_recursion(lam, &vec![0.0; lam.len()], problem.sigma2, &schedule) } else { 0.0 };
    Ok(RiskEstimate::exact(RiskMethod::ExactRecursion, bias, variance))
}

/// `Σ λᵢ w*ᵢ² ∏ₛ (1 − ηₛλᵢ)²`, the noiseless deterministic part of SGD.
pub fn sgd_population_bias(problem: &ProblemInstance, n: usize, eta0: f64) -> f64 {
    let schedule = sgd_schedule(n, eta0);
    let terms: Vec<f64> = problem
        .eigenvalues()
        .iter()
        .zip(&problem.wstar)
        .map(|(&l, &w)| {
            let prod: f64 = schedule.iter().map(|e| (1.0 - e * l) * (1.0 - e * l)).product();
            l * w * w * prod
        })
        .collect();
    pairwise_sum(&terms)
}

/// Empirical covariance spectrum `μⱼ = sⱼ²/n` and the coordinates of w* in its eigenbasis.
fn empirical_basis(ds: &Dataset, problem: &ProblemInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    if ds.d() != problem.d() {
        return Err(Error::DimensionMismatch { expected: problem.d(), got: ds.d() });
    }
    let svd = ds.svd()?;
    let n = ds.n() as f64;
    let mu = svd.singular_values().iter().map(|s| s * s / n).collect();
    let alpha = linalg::mat_t_vec(svd.v(), &problem.wstar);
    Ok((mu, alpha))
}

/// Fixed-design ridge risk, measured in the empirical covariance norm.
pub fn fixed_design_ridge_risk(ds: &Dataset, problem: &ProblemInstance, lambda: f64) -> Result<RiskEstimate> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and nonnegative")));
    }
    let (mu, alpha) = empirical_basis(ds, problem)?;
    let n = ds.n() as f64;
    let bias: Vec<f64> =
        mu.iter().zip(&alpha).map(|(&m, &a)| lambda * lambda * m * a * a / ((m + lambda) * (m + lambda))).collect();
    let var: Vec<f64> = mu.iter().map(|&m| (m / (m + lambda)).powi(2)).collect();
    Ok(RiskEstimate::exact(
        RiskMethod::FixedDesignClosedForm,
        pairwise_sum(&bias),
        problem.sigma2 / n * pairwise_sum(&var),
    ))
}

/// Fixed-design GD risk, measured in the empirical covariance norm.
pub fn fixed_design_gd_risk(ds: &Dataset, problem: &ProblemInstance, eta: f64, t: u64) -> Result<RiskEstimate> {
    let (mu, alpha) = empirical_basis(ds, problem)?;
    let top = mu.first().copied().unwrap_or(0.0);
    check_stepsize(eta, if top > 0.0 { 1.0 / top } else { f64::INFINITY })?;
    let n = ds.n() as f64;
    let bias: Vec<f64> = mu.iter().zip(&alpha).map(|(&m, &a)| m * pow_one_minus(eta * m, t).powi(2) * a * a).collect();
    let var: Vec<f64> = mu.iter().map(|&m| one_minus_pow(eta * m, t).powi(2)).collect();
    Ok(RiskEstimate::exact(
        RiskMethod::FixedDesignClosedForm,
        pairwise_sum(&bias),
        problem.sigma2 / n * pairwise_sum(&var),
    ))
}

fn estimate_from(samples: &[f64]) -> RiskEstimate {
    let (mean, stderr) = mean_and_stderr(samples);
    RiskEstimate { mean, stderr, trials: samples.len(), method: RiskMethod::MonteCarlo, bias: None, variance: None }
}

/// Fit ridge or GD on a dataset that retains its noise.
fn fit(ds: &Dataset, config: EstimatorConfig) -> Result<Vec<f64>> {
    match config {
        EstimatorConfig::Ridge { lambda } => ridge_fit(ds, lambda),
        EstimatorConfig::Gd { eta, t } => gd_analytic(ds, eta, t),
        EstimatorConfig::Sgd { .. } => Err(Error::InvalidArgument("SGD is not a fixed-design estimator".into())),
    }
}

/// Resample the noise `trials` times on a frozen design and average the
/// population excess risk of ridge or GD. Used to cross-check the exact oracles.
pub fn noise_monte_carlo(
    ds: &Dataset,
    problem: &ProblemInstance,
    config: EstimatorConfig,
    trials: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    ds.svd()?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|k| {
            let noise = draw_noise(&mut rng_from(seed, &[stream::NOISE, k as u64]), ds.n(), problem.sigma2);
            excess_risk(&fit(&ds.with_noise(noise)?, config)?, problem)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(estimate_from(&samples))
}

/// Same as [`noise_monte_carlo`] but measuring `(1/n)‖X(ŵ − w*)‖²`.
pub fn noise_monte_carlo_fixed_design(
    ds: &Dataset,
    problem: &ProblemInstance,
    config: EstimatorConfig,
    trials: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    ds.svd()?;
    let n = ds.n() as f64;
    let samples = (0..trials)
        .into_par_iter()
        .map(|k| {
            let noise = draw_noise(&mut rng_from(seed, &[stream::NOISE, k as u64]), ds.n(), problem.sigma2);
            let w = fit(&ds.with_noise(noise)?, config)?;
            let diff: Vec<f64> = w.iter().zip(&problem.wstar).map(|(a, b)| a - b).collect();
            let xd = linalg::mat_vec(ds.x(), &diff);
            Ok(xd.iter().map(|v| v * v).sum::<f64>() / n)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(estimate_from(&samples))
}

/// Average risk over fresh draws. Ridge and GD integrate the noise exactly
/// per design; SGD averages the excess risk of full independent paths.
pub fn monte_carlo_risk(
    problem: &ProblemInstance,
    config: EstimatorConfig,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    config.validate()?;
    if trials < 2 {
        return Err(Error::InvalidArgument("monte carlo needs at least 2 trials".into()));
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|k| {
            let trial_seed = derive_seed(seed, &[k as u64]);
            match config {
                EstimatorConfig::Sgd { eta0 } => {
                    Ok((excess_risk(&sgd_run(problem, n, eta0, trial_seed)?, problem)?, None))
                }
                EstimatorConfig::Ridge { lambda } => {
                    let (b, v) =
                        DesignSummary::sample(problem, n, trial_seed)?.bias_variance(Filter::Ridge { lambda })?;
                    Ok((b + v, Some((b, v))))
                }
                EstimatorConfig::Gd { eta, t } => {
                    let (b, v) = DesignSummary::sample(problem, n, trial_seed)?.bias_variance(Filter::Gd { eta, t })?;
                    Ok((b + v, Some((b, v))))
                }
            }
        })
        .collect::<Result<Vec<(f64, Option<(f64, f64)>)>>>()?;
    let samples: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let mut est = estimate_from(&samples);
    if per_trial.iter().all(|p| p.1.is_some()) {
        let bs: Vec<f64> = per_trial.iter().map(|p| p.1.unwrap().0).collect();
        let vs: Vec<f64> = per_trial.iter().map(|p| p.1.unwrap().1).collect();
        let k = trials as f64;
        let (b, v) = (pairwise_sum(&bs) / k, pairwise_sum(&vs) / k);
        est.bias = Some(b);
        est.variance = Some(v);
        est.mean = b + v;
    }
    Ok(est)
}
