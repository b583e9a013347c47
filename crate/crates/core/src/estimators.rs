//! Ridge regression, gradient descent and one-pass scheduled SGD.
//!
//! Everything touching `XᵀX` goes through the thin SVD of `X`, so no
//! `d × d` matrix is ever formed.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, one_minus_pow};
use crate::problem::{draw_coordinate, ProblemInstance};
use crate::seed::{rng_from, stream};

/// Relative slack allowed on the stepsize stability limit.
pub const STEPSIZE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Ridge { lambda: f64 },
    Gd { eta: f64, t: u64 },
    Sgd { eta0: f64 },
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} = {v} is not admissible")));
        match *self {
            EstimatorConfig::Ridge { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => bad("lambda", lambda),
            EstimatorConfig::Gd { eta, .. } if !(eta > 0.0 && eta.is_finite()) => bad("eta", eta),
            EstimatorConfig::Sgd { eta0 } if !(eta0 > 0.0 && eta0.is_finite()) => bad("eta0", eta0),
            _ => Ok(()),
        }
    }
}

/// `n / ‖X Xᵀ‖`, or `+∞` for an all-zero design.
pub fn max_stable_stepsize(ds: &Dataset) -> Result<f64> {
    let norm = ds.gram_norm()?;
    Ok(if norm > 0.0 { ds.n() as f64 / norm } else { f64::INFINITY })
}

pub(crate) fn check_stepsize(eta: f64, limit: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must be positive and finite")));
    }
    if eta > limit * (1.0 + STEPSIZE_TOL) {
        return Err(Error::UnstableStepsize { eta, limit });
    }
    Ok(())
}

/// `(XᵀX + nλI)⁻¹ Xᵀ y`; at `λ = 0` the minimum-norm interpolator.
pub fn ridge_fit(ds: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and nonnegative")));
    }
    let svd = ds.svd()?;
    let nl = ds.n() as f64 * lambda;
    let uty = linalg::mat_t_vec(svd.u(), ds.y());
    let coef: Vec<f64> = svd.singular_values().iter().zip(&uty).map(|(&s, &c)| c * s / (s * s + nl)).collect();
    Ok(linalg::mat_vec(svd.v(), &coef))
}

/// Plain gradient descent from zero, returning the iterate at each checkpoint.
pub fn gd_path(ds: &Dataset, eta: f64, checkpoints: &[u64]) -> Result<Vec<Vec<f64>>> {
    check_stepsize(eta, max_stable_stepsize(ds)?)?;
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("checkpoints must be sorted ascending".into()));
    }
    let (n, d) = (ds.n(), ds.d());
    let scale = eta / n as f64;
    let mut w = vec![0.0; d];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut step = 0u64;
    for &t in checkpoints {
        while step < t {
            let mut r = linalg::mat_vec(ds.x(), &w);
            r.iter_mut().zip(ds.y()).for_each(|(ri, yi)| *ri -= yi);
            let g = linalg::mat_t_vec(ds.x(), &r);
            w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= scale * gi);
            step += 1;
        }
        out.push(w.clone());
    }
    Ok(out)
}

/// Closed-form GD iterate built from w* and the realized noise.
pub fn gd_analytic(ds: &Dataset, eta: f64, t: u64) -> Result<Vec<f64>> {
    let wstar = ds.wstar().ok_or(Error::MissingOracleData("w*"))?;
    let noise = ds.noise().ok_or(Error::MissingOracleData("noise"))?;
    check_stepsize(eta, max_stable_stepsize(ds)?)?;
    let svd = ds.svd()?;
    let n = ds.n() as f64;
    let vw = linalg::mat_t_vec(svd.v(), wstar);
    let ue = linalg::mat_t_vec(svd.u(), noise);
    let coef: Vec<f64> = svd
        .singular_values()
        .iter()
        .zip(vw.iter().zip(&ue))
        .map(|(&s, (&a, &e))| {
            let g = one_minus_pow(eta * s * s / n, t);
            g * a + g * e / s
        })
        .collect();
    Ok(linalg::mat_vec(svd.v(), &coef))
}

/// `η_s = η₀ / 2^{⌊s ln(n) / n⌋}` for `s = 1..=n`.
pub fn sgd_schedule(n: usize, eta0: f64) -> Vec<f64> {
    let ln = (n.max(1) as f64).ln();
    let nf = n as f64;
    (1..=n)
        .map(|s| {
            let stage = (s as f64 * ln / nf).floor() as i32;
            eta0 * 0.5f64.powi(stage)
        })
        .collect()
}

/// Whether `eta0 ≤ 1/(4 tr Σ)`.
pub fn sgd_stepsize_admissible(problem: &ProblemInstance, eta0: f64) -> bool {
    eta0 <= 1.0 / (4.0 * problem.trace()) * (1.0 + STEPSIZE_TOL)
}

/// One pass of scheduled SGD over `n` fresh samples, returning the last iterate.
pub fn sgd_run(problem: &ProblemInstance, n: usize, eta0: f64, seed: u64) -> Result<Vec<f64>> {
    EstimatorConfig::Sgd { eta0 }.validate()?;
    let d = problem.d();
    let sqrt_l: Vec<f64> = problem.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let sd = problem.sigma2.sqrt();
    let mut rng = rng_from(seed, &[stream::SGD_PATH]);
    // track v = w − w*
    let mut v: Vec<f64> = problem.wstar.iter().map(|w| -w).collect();
    let mut x = vec![0.0; d];
    for eta in sgd_schedule(n, eta0) {
        for (xi, s) in x.iter_mut().zip(&sqrt_l) {
            *xi = s * draw_coordinate(&mut rng, problem.design);
        }
        let eps: f64 = sd * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal);
        let resid: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - eps;
        let k = eta * resid;
        v.iter_mut().zip(&x).for_each(|(vi, xi)| *vi -= k * xi);
    }
    Ok(v.iter().zip(&problem.wstar).map(|(vi, w)| vi + w).collect())
}
