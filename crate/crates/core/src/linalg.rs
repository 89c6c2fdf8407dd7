//! Small dense linear-algebra helpers shared by the filters.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Floor level `1e-9 · (1 + trace / n)` used by [`floor_covariance`].
pub fn floor_level(cov: &Matrix) -> f64 {
    let n = cov.nrows().max(1) as f64;
    1e-9 * (1.0 + cov.trace() / n)
}

/// Adds `ε·I` when the smallest eigenvalue falls below `ε`.
///
/// Rank-deficient sample covariances (a single particle, collinear ensembles) are
/// the usual trigger. Strongly indefinite input is left for the Cholesky factorization
/// to reject.
pub fn floor_covariance(cov: &Matrix) -> Matrix {
    let sym = symmetrize(cov);
    let eps = floor_level(&sym);
    let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
    if min_eig < eps {
        let n = sym.nrows();
        sym + Matrix::identity(n, n) * eps
    } else {
        sym
    }
}

pub fn cholesky(cov: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)
}

/// Unbiased sample covariance (`J − 1` denominator). A single state yields the zero matrix.
pub fn sample_covariance(states: &[Vector]) -> Result<Matrix> {
    let first = states.first().ok_or(Error::Empty("states"))?;
    let dim = first.len();
    let count = states.len();
    let mut mean = Vector::zeros(dim);
    for s in states {
        if s.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
        }
        mean += s;
    }
    mean /= count as f64;
    let mut cov = Matrix::zeros(dim, dim);
    if count < 2 {
        return Ok(cov);
    }
    for s in states {
        let d = s - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= (count - 1) as f64;
    Ok(cov)
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a % two_pi;
    if w <= -PI {
        w += two_pi;
    } else if w > PI {
        w -= two_pi;
    }
    w
}

/// A multivariate normal density with its factorization cached, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PreparedGaussian {
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl PreparedGaussian {
    pub fn new(cov: &Matrix) -> Result<Self> {
        let chol = cholesky(cov)?;
        let n = cov.nrows() as f64;
        let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let log_norm = -0.5 * n * (2.0 * PI).ln() - log_det_half;
        Ok(Self { chol, log_norm })
    }

    /// Log density of a zero-mean deviation.
    pub fn ln_density(&self, deviation: &Vector) -> f64 {
        let l = self.chol.l_dirty();
        let y = l
            .solve_lower_triangular(deviation)
            .expect("cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * y.norm_squared()
    }

    pub fn density(&self, deviation: &Vector) -> f64 {
        self.ln_density(deviation).exp()
    }

    pub fn lower(&self) -> Matrix {
        self.chol.l()
    }
}
