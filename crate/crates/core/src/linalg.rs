//! Dense linear algebra used by the estimators and oracles.
//!
//! All kernels run with `Par::Seq`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self as tri, BlockStructure};
use faer::{Accum, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// `X Xᵀ` for an `n × d` matrix, full symmetric result.
pub fn gram(x: MatRef<'_, f64>) -> Mat<f64> {
    let mut a = Mat::<f64>::zeros(x.nrows(), x.nrows());
    gram_accumulate(&mut a, x, None);
    mirror_lower(&mut a);
    a
}

/// Adds `X diag(w) Xᵀ` (or `X Xᵀ` when `weights` is `None`) into the lower
/// triangle of `acc`. The upper triangle is left untouched.
pub(crate) fn gram_accumulate(acc: &mut Mat<f64>, x: MatRef<'_, f64>, weights: Option<&[f64]>) {
    match weights {
        None => tri::matmul(
            acc.as_mut(),
            BlockStructure::TriangularLower,
            Accum::Add,
            x,
            BlockStructure::Rectangular,
            x.transpose(),
            BlockStructure::Rectangular,
            1.0,
            Par::Seq,
        ),
        Some(w) => {
            debug_assert_eq!(w.len(), x.ncols());
            let scaled = Mat::<f64>::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[j]);
            tri::matmul(
                acc.as_mut(),
                BlockStructure::TriangularLower,
                Accum::Add,
                scaled.as_ref(),
                BlockStructure::Rectangular,
                x.transpose(),
                BlockStructure::Rectangular,
                1.0,
                Par::Seq,
            )
        }
    }
}

pub(crate) fn mirror_lower(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// `A B` with sequential kernels.
pub fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// `A v` for a dense matrix and a slice.
pub fn mat_vec(a: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), v.len());
    let mut out = vec![0.0; a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o += aij * vj;
        }
    }
    out
}

/// `Aᵀ v`.
pub fn mat_t_vec(a: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.nrows(), v.len());
    (0..a.ncols()).map(|j| a.col(j).iter().zip(v).map(|(&aij, &vi)| aij * vi).sum()).collect()
}

/// Eigendecomposition of a symmetric matrix (lower triangle is read).
/// Eigenvalues are returned in nonincreasing order with matching columns.
pub fn sym_eigen_desc(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut u = Mat::<f64>::zeros(n, n);
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let par = Par::Seq;
    let mut buf =
        MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, par, Default::default()));
    evd::self_adjoint_evd(a, s.as_mut(), Some(u.as_mut()), par, MemStack::new(&mut buf), Default::default())
        .map_err(|_| Error::Decomposition)?;
    let vals = s.column_vector();
    // faer sorts ascending
    let values: Vec<f64> = (0..n).rev().map(|i| vals[i]).collect();
    let vectors = Mat::<f64>::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Relative eigenvalue floor for pseudo-inverses built from a Gram matrix.
pub(crate) fn gram_cutoff(n: usize, d: usize, top: f64) -> f64 {
    n.max(d) as f64 * f64::EPSILON * top
}

/// Thin singular value decomposition `X = U diag(s) Vᵀ`, restricted to the
/// numerically nonzero singular values.
///
/// Built from the eigendecomposition of whichever Gram matrix is smaller
/// (`X Xᵀ` when `n ≤ d`, `Xᵀ X` otherwise), so the cost is `O(min(n,d)² max(n,d))`
/// and no `d × d` matrix is formed when `d > n`. A Gram eigenvalue is kept
/// when it exceeds `max(n, d) · ε · μ_max`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
}

impl ThinSvd {
    pub fn new(x: MatRef<'_, f64>) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if n == 0 || d == 0 {
            return Ok(Self { u: Mat::zeros(n, 0), s: Vec::new(), v: Mat::zeros(d, 0) });
        }
        let wide = n <= d;
        let g = if wide { gram(x) } else { gram(x.transpose()) };
        let (mu, vecs) = sym_eigen_desc(g.as_ref())?;
        let top = mu[0].max(0.0);
        let floor = gram_cutoff(n, d, top);
        let rank = mu.iter().take_while(|&&m| m > floor && m > 0.0).count();
        let s: Vec<f64> = mu[..rank].iter().map(|m| m.sqrt()).collect();
        let kept = vecs.as_ref().subcols(0, rank);
        // the other factor is X (or Xᵀ) times the kept eigenvectors, rescaled
        let other = if wide { mul(x.transpose(), kept) } else { mul(x, kept) };
        let other = Mat::<f64>::from_fn(other.nrows(), rank, |i, j| other[(i, j)] / s[j]);
        let kept = kept.to_owned();
        let (u, v) = if wide { (kept, other) } else { (other, kept) };
        Ok(Self { u, s, v })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn u(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }

    pub fn v(&self) -> MatRef<'_, f64> {
        self.v.as_ref()
    }

    /// Largest singular value, 0 for an all-zero matrix.
    pub fn top(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }
}

/// `1 − (1 − x)^t`, accurate for small `x` and huge `t`.
pub fn one_minus_pow(x: f64, t: u64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    if (0.0..1.0).contains(&x) {
        -((t as f64) * (-x).ln_1p()).exp_m1()
    } else {
        1.0 - (1.0 - x).powf(t as f64)
    }
}

/// `(1 − x)^t` for `x ∈ [0, 2]`.
pub fn pow_one_minus(x: f64, t: u64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if (0.0..1.0).contains(&x) {
        ((t as f64) * (-x).ln_1p()).exp()
    } else {
        (1.0 - x).powf(t as f64)
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean (sample std / √k).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}
