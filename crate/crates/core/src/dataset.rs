use std::sync::OnceLock;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, ThinSvd};

/// One sampled design with responses, plus lazily cached decompositions.
///
/// When the dataset was drawn from a known problem, the noise vector and w*
/// are retained for oracle use.
#[derive(Debug)]
pub struct Dataset {
    x: Mat<f64>,
    y: Vec<f64>,
    noise: Option<Vec<f64>>,
    wstar: Option<Vec<f64>>,
    svd: OnceLock<ThinSvd>,
    gram: OnceLock<Mat<f64>>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        let out = Self {
            x: self.x.clone(),
            y: self.y.clone(),
            noise: self.noise.clone(),
            wstar: self.wstar.clone(),
            svd: OnceLock::new(),
            gram: OnceLock::new(),
        };
        if let Some(s) = self.svd.get() {
            let _ = out.svd.set(s.clone());
        }
        out
    }
}

impl Dataset {
    /// Observed data only.
    pub fn new(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        Ok(Self { x, y, noise: None, wstar: None, svd: OnceLock::new(), gram: OnceLock::new() })
    }

    /// `y = X w* + noise`, keeping both parts.
    pub fn with_truth(x: Mat<f64>, wstar: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        if wstar.len() != x.ncols() {
            return Err(Error::DimensionMismatch { expected: x.ncols(), got: wstar.len() });
        }
        if noise.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: noise.len() });
        }
        let mut y = linalg::mat_vec(x.as_ref(), &wstar);
        y.iter_mut().zip(&noise).for_each(|(yi, e)| *yi += e);
        Ok(Self { x, y, noise: Some(noise), wstar: Some(wstar), svd: OnceLock::new(), gram: OnceLock::new() })
    }

    /// Same design and w*, different noise realization. The cached SVD is shared.
    pub fn with_noise(&self, noise: Vec<f64>) -> Result<Self> {
        let wstar = self.wstar.clone().ok_or(Error::MissingOracleData("w*"))?;
        let out = Self::with_truth(self.x.clone(), wstar, noise)?;
        if let Some(s) = self.svd.get() {
            let _ = out.svd.set(s.clone());
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> MatRef<'_, f64> {
        self.x.as_ref()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn noise(&self) -> Option<&[f64]> {
        self.noise.as_deref()
    }

    pub fn wstar(&self) -> Option<&[f64]> {
        self.wstar.as_deref()
    }

    pub fn svd(&self) -> Result<&ThinSvd> {
        if let Some(s) = self.svd.get() {
            return Ok(s);
        }
        let s = ThinSvd::new(self.x.as_ref())?;
        Ok(self.svd.get_or_init(|| s))
    }

    /// `A = X Xᵀ`.
    pub fn gram(&self) -> &Mat<f64> {
        self.gram.get_or_init(|| linalg::gram(self.x.as_ref()))
    }

    /// `‖X Xᵀ‖`, the squared top singular value.
    pub fn gram_norm(&self) -> Result<f64> {
        Ok(self.svd()?.top().powi(2))
    }

    /// Empirical risk `(1/n)‖Xw − y‖²`.
    pub fn empirical_risk(&self, w: &[f64]) -> f64 {
        let r = linalg::mat_vec(self.x.as_ref(), w);
        let sq: Vec<f64> = r.iter().zip(&self.y).map(|(a, b)| (a - b) * (a - b)).collect();
        linalg::pairwise_sum(&sq) / self.n() as f64
    }
}
