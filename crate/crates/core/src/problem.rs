//! Problem instances: population spectrum, true parameter and noise level.
//!
//! The covariance is diagonal in its eigenbasis, so `wstar[i]` is the
//! coordinate of w* along the i-th eigenvector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::seed::{rng_from, stream};

/// Nonincreasing, strictly positive covariance eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spectrum::new(v)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.eigenvalues
    }
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        if let Some(i) = eigenvalues.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {} at index {i} is not positive and finite",
                eigenvalues[i]
            )));
        }
        if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum(format!("eigenvalues increase at index {}", i + 1)));
        }
        Ok(Self { eigenvalues })
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        pairwise_sum(&self.eigenvalues)
    }

    /// `tail[k] = Σ_{i>k} λᵢ` (1-based i), for `k = 0..=d`.
    pub fn tail_sums(&self) -> Vec<f64> {
        suffix_sums(&self.eigenvalues)
    }

    /// `tail[k] = Σ_{i>k} λᵢ²`, for `k = 0..=d`.
    pub fn tail_sq_sums(&self) -> Vec<f64> {
        let sq: Vec<f64> = self.eigenvalues.iter().map(|l| l * l).collect();
        suffix_sums(&sq)
    }
}

pub(crate) fn suffix_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len() + 1];
    for i in (0..xs.len()).rev() {
        out[i] = out[i + 1] + xs[i];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub spectrum: Spectrum,
    pub wstar: Vec<f64>,
    pub sigma2: f64,
    pub design: Design,
    pub sigma_x2: f64,
}

impl ProblemInstance {
    pub fn d(&self) -> usize {
        self.spectrum.d()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    /// ‖w*‖²_Σ
    pub fn signal(&self) -> f64 {
        let terms: Vec<f64> = self.eigenvalues().iter().zip(&self.wstar).map(|(l, w)| l * w * w).collect();
        pairwise_sum(&terms)
    }

    pub fn trace(&self) -> f64 {
        self.spectrum.trace()
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidProblem(format!("sigma2 = {sigma2} must be finite and nonnegative")));
        }
        self.sigma2 = sigma2;
        Ok(self)
    }
}

/// Absolute constants appearing in the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub sigma_lambda: f64,
    pub b: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { c0: 1.0, c1: 1.0, c2: 2.0, c3: 10.0, sigma_lambda: 3.0, b: 1.0 }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be at least 1")));
            }
        }
        for (name, v) in [("sigma_lambda", self.sigma_lambda), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 >= 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!("sigma2 = {sigma2} must be finite and nonnegative")))
    }
}

/// `(a, r)` power-law instance: `λᵢ = i^{-a}`, `w*ᵢ ∝ i^{(a−b)/2}` with
/// `b = 1 + 2ar + δ`, scaled so that `Σ λᵢ^{1−2r} w*ᵢ² = 1`.
pub fn make_power_law_problem(a: f64, r: f64, d: usize, sigma2: f64, delta: f64) -> Result<ProblemInstance> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidProblem(format!("a = {a} must exceed 1 for a finite trace")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidProblem(format!("r = {r} must be nonnegative")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidProblem(format!("delta = {delta} must be positive")));
    }
    if d == 0 {
        return Err(Error::InvalidProblem("d must be positive".into()));
    }
    check_sigma2(sigma2)?;
    let b = 1.0 + 2.0 * a * r + delta;
    let lambda: Vec<f64> = (1..=d).map(|i| (i as f64).powf(-a)).collect();
    let mut w: Vec<f64> = (1..=d).map(|i| (i as f64).powf((a - b) / 2.0)).collect();
    let source: Vec<f64> = lambda.iter().zip(&w).map(|(l, wi)| l.powf(1.0 - 2.0 * r) * wi * wi).collect();
    let scale = pairwise_sum(&source).sqrt();
    w.iter_mut().for_each(|wi| *wi /= scale);
    Ok(ProblemInstance { spectrum: Spectrum::new(lambda)?, wstar: w, sigma2, design: Design::Gaussian, sigma_x2: 1.0 })
}

/// Spike instance: `w* = (n^{0.45}, 0, …)`, `Σ = diag(n^{-0.9}, 1/d, …, 1/d)`.
pub fn make_spike_problem(n: usize, d: usize, sigma2: f64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidProblem("spike instance needs n ≥ 2".into()));
    }
    if d < n.saturating_mul(n) {
        return Err(Error::InvalidProblem(format!("d ≥ n² required (n = {n}, d = {d})")));
    }
    check_sigma2(sigma2)?;
    if sigma2 > 1.0 {
        return Err(Error::InvalidProblem(format!("spike instance needs sigma2 ≤ 1, got {sigma2}")));
    }
    let nf = n as f64;
    let mut lambda = vec![1.0 / d as f64; d];
    lambda[0] = nf.powf(-0.9);
    let mut w = vec![0.0; d];
    w[0] = nf.powf(0.45);
    Ok(ProblemInstance { spectrum: Spectrum::new(lambda)?, wstar: w, sigma2, design: Design::Gaussian, sigma_x2: 1.0 })
}

pub fn make_custom_problem(
    spectrum: Vec<f64>,
    wstar: Vec<f64>,
    sigma2: f64,
    design: Design,
) -> Result<ProblemInstance> {
    let spectrum = Spectrum::new(spectrum)?;
    if wstar.len() != spectrum.d() {
        return Err(Error::DimensionMismatch { expected: spectrum.d(), got: wstar.len() });
    }
    if let Some(w) = wstar.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidProblem(format!("w* has non-finite entry {w}")));
    }
    check_sigma2(sigma2)?;
    Ok(ProblemInstance { spectrum, wstar, sigma2, design, sigma_x2: 1.0 })
}

/// `λᵢ = base^{-i}`.
pub fn exponential_spectrum(base: f64, d: usize) -> Result<Spectrum> {
    if !(base > 1.0) {
        return Err(Error::InvalidSpectrum(format!("base = {base} must exceed 1")));
    }
    Spectrum::new((1..=d).map(|i| base.powi(-(i as i32))).collect())
}

/// `λᵢ = i^{-a} ln^{-2}(i + 1)`.
pub fn polylog_spectrum(a: f64, d: usize) -> Result<Spectrum> {
    Spectrum::new((1..=d).map(|i| (i as f64).powf(-a) / ((i as f64) + 1.0).ln().powi(2)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConditionReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub worst_tau: f64,
}

/// Checks `τ Σ_{λᵢ<1/τ} λᵢ ≤ σ_λ #{λᵢ ≥ 1/τ}` on `tau_count` log-spaced
/// values of τ from `1/λ₁` to `1/λ_d`.
pub fn check_spectrum_condition(spectrum: &Spectrum, sigma_lambda: f64, tau_count: usize) -> SpectrumConditionReport {
    let lam = spectrum.values();
    let tail = spectrum.tail_sums();
    let (lo, hi) = (1.0 / lam[0], 1.0 / lam[lam.len() - 1]);
    let count = tau_count.max(1);
    let mut worst = SpectrumConditionReport { holds: true, worst_ratio: f64::NEG_INFINITY, worst_tau: lo };
    for g in 0..count {
        let tau = if g == 0 {
            lo
        } else if g == count - 1 {
            hi
        } else {
            (lo.ln() + (hi.ln() - lo.ln()) * g as f64 / (count - 1) as f64).exp()
        };
        let theta = 1.0 / tau;
        let cut = theta * (1.0 - 1e-9);
        let k = lam.partition_point(|&l| l >= cut);
        let lhs = tau * tail[k];
        let ratio = lhs / (sigma_lambda * k as f64);
        if ratio > worst.worst_ratio {
            worst.worst_ratio = ratio;
            worst.worst_tau = tau;
        }
    }
    worst.holds = worst.worst_ratio <= 1.0;
    worst
}

/// Smallest σ_λ for which the spectrum condition holds at every
/// `τ ∈ [1/λ₁, 1/λ_d]`: `max_k Σ_{i>k} λᵢ / (k λ_{k+1})`.
pub fn min_sigma_lambda(spectrum: &Spectrum) -> f64 {
    let lam = spectrum.values();
    let tail = spectrum.tail_sums();
    (1..lam.len()).filter(|&k| lam[k] < lam[k - 1]).map(|k| tail[k] / (k as f64 * lam[k])).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub signal: f64,
    pub snr_bound: f64,
    pub in_l_b: bool,
    pub min_sigma_lambda: f64,
    pub spectrum_condition: bool,
    pub in_s_b: bool,
}

/// Membership in the SNR-bounded class and in its fast-decay subclass.
pub fn class_membership(problem: &ProblemInstance, constants: &BoundConstants) -> MembershipReport {
    let signal = problem.signal();
    let snr_bound = constants.b * problem.sigma2;
    let in_l_b = signal <= snr_bound * (1.0 + 1e-12);
    let min_sigma = min_sigma_lambda(&problem.spectrum);
    let spectrum_condition = min_sigma <= constants.sigma_lambda;
    MembershipReport {
        signal,
        snr_bound,
        in_l_b,
        min_sigma_lambda: min_sigma,
        spectrum_condition,
        in_s_b: in_l_b && spectrum_condition,
    }
}

pub(crate) fn draw_coordinate(rng: &mut ChaCha8Rng, design: Design) -> f64 {
    match design {
        Design::Gaussian => rng.sample(StandardNormal),
        Design::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

pub(crate) fn draw_noise(rng: &mut ChaCha8Rng, n: usize, sigma2: f64) -> Vec<f64> {
    let sd = sigma2.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect()
}

/// Draw `n` samples. The design is generated column by column from one
/// stream and the noise from another, both derived from `seed`.
pub fn sample_dataset(problem: &ProblemInstance, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let d = problem.d();
    let mut rng = rng_from(seed, &[stream::DESIGN]);
    let mut x = faer::Mat::<f64>::zeros(n, d);
    for (j, &l) in problem.eigenvalues().iter().enumerate() {
        let s = l.sqrt();
        for i in 0..n {
            x[(i, j)] = s * draw_coordinate(&mut rng, problem.design);
        }
    }
    let noise = draw_noise(&mut rng_from(seed, &[stream::NOISE]), n, problem.sigma2);
    Dataset::with_truth(x, problem.wstar.clone(), noise)
}

/// Serializable description of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub spectrum: SpectrumSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wstar: Option<Vec<f64>>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub design: Design,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_sigma2() -> f64 {
    1.0
}

/// Either `{"kind": ..., "params": {...}, "d": ...}` or `{"explicit": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<f64>>,
}

fn param(params: &serde_json::Value, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::InvalidProblem(format!("spectrum parameter `{key}` must be a number"))),
    }
}

fn required(params: &serde_json::Value, key: &str, kind: &str) -> Result<f64> {
    param(params, key)?.ok_or_else(|| Error::InvalidProblem(format!("{kind} spectrum needs parameter `{key}`")))
}

impl ProblemSpec {
    /// Default truncation for generated spectra when `d` is absent.
    pub fn default_d(n: Option<usize>) -> usize {
        n.map_or(1000, |n| (10 * n).max(1000))
    }

    pub fn kind(&self) -> &str {
        if self.spectrum.explicit.is_some() {
            "explicit"
        } else {
            self.spectrum.kind.as_deref().unwrap_or("")
        }
    }

    /// Instantiate the problem; `n` fills in sample-size dependent defaults
    /// (spike size, power-law truncation).
    pub fn build(&self, n: Option<usize>) -> Result<ProblemInstance> {
        let sp = &self.spectrum;
        let mut problem = match (&sp.explicit, sp.kind.as_deref()) {
            (Some(_), Some(_)) => return Err(Error::InvalidProblem("spectrum has both `explicit` and `kind`".into())),
            (Some(values), None) => {
                let w = self
                    .wstar
                    .clone()
                    .ok_or_else(|| Error::InvalidProblem("explicit spectrum needs `wstar`".into()))?;
                make_custom_problem(values.clone(), w, self.sigma2, self.design)?
            }
            (None, Some("power_law")) => {
                let a = required(&sp.params, "a", "power_law")?;
                let r = required(&sp.params, "r", "power_law")?;
                let delta = param(&sp.params, "delta")?.unwrap_or(0.1);
                let d = sp.d.unwrap_or_else(|| Self::default_d(n));
                let mut p = make_power_law_problem(a, r, d, self.sigma2, delta)?;
                if let Some(w) = &self.wstar {
                    p = make_custom_problem(p.spectrum.into(), w.clone(), self.sigma2, self.design)?;
                }
                p
            }
            (None, Some("spike")) => {
                let sn = match param(&sp.params, "n")? {
                    Some(v) if v >= 1.0 && v.fract() == 0.0 => v as usize,
                    Some(v) => return Err(Error::InvalidProblem(format!("spike n = {v} must be a positive integer"))),
                    None => n.ok_or_else(|| Error::InvalidProblem("spike spectrum needs parameter `n`".into()))?,
                };
                let d = sp.d.unwrap_or(sn * sn);
                make_spike_problem(sn, d, self.sigma2)?
            }
            (None, Some(kind @ ("exponential" | "polylog"))) => {
                let d = sp.d.ok_or_else(|| Error::InvalidProblem(format!("{kind} spectrum needs `d`")))?;
                let spectrum = if kind == "exponential" {
                    exponential_spectrum(param(&sp.params, "base")?.unwrap_or(2.0), d)?
                } else {
                    polylog_spectrum(param(&sp.params, "a")?.unwrap_or(1.0), d)?
                };
                let w = self
                    .wstar
                    .clone()
                    .ok_or_else(|| Error::InvalidProblem(format!("{kind} spectrum needs `wstar`")))?;
                make_custom_problem(spectrum.into(), w, self.sigma2, self.design)?
            }
            (None, Some(other)) => return Err(Error::InvalidProblem(format!("unknown spectrum kind `{other}`"))),
            (None, None) => return Err(Error::InvalidProblem("spectrum needs `kind` or `explicit`".into())),
        };
        problem.design = self.design;
        Ok(problem)
    }
}
