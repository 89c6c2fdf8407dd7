//! Single-target ensemble Gaussian mixture filter, written directly from its own
//! recursion (unscaled Silverman bandwidth, normalized weights, no clutter or
//! missed detections). It serves as the reference that the multi-target filter must
//! reproduce when there is one target, no births, perfect survival and detection,
//! and no clutter.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussmix::silverman_bandwidth;
use crate::linalg::{floor_covariance, symmetrize};
use crate::models::{MeasurementModel, MotionModel};
use crate::{Matrix, Vector};

/// Intermediate products of one reference step, exposed for comparison.
#[derive(Debug, Clone)]
pub struct EngmfStep {
    pub prior_means: Vec<Vector>,
    pub prior_cov: Matrix,
    /// Normalized posterior weights.
    pub weights: Vec<f64>,
    pub posterior_means: Vec<Vector>,
    pub posterior_covs: Vec<Matrix>,
    pub particles: Vec<Vector>,
}

fn ensemble_covariance(xs: &[Vector]) -> Matrix {
    let n = xs[0].len();
    let j = xs.len() as f64;
    let mean = xs.iter().fold(Vector::zeros(n), |acc, x| acc + x) / j;
    let mut cov = Matrix::zeros(n, n);
    if xs.len() > 1 {
        for x in xs {
            let d = x - &mean;
            cov += &d * d.transpose();
        }
        cov /= j - 1.0;
    }
    cov
}

/// Propagate, smooth, update with one measurement and resample `particles.len()` draws.
pub fn engmf_step<R: Rng + ?Sized>(
    particles: &[Vector],
    z: &Vector,
    motion: &MotionModel,
    sensor: &MeasurementModel,
    rng: &mut R,
) -> Result<EngmfStep> {
    if particles.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let prior_means: Vec<Vector> = particles
        .iter()
        .map(|x| motion.propagate_noisy(x, rng))
        .collect::<Result<_>>()?;
    let j = prior_means.len();
    let dim = prior_means[0].len();
    let beta = silverman_bandwidth(dim, j)?;
    let prior_cov = floor_covariance(&(ensemble_covariance(&prior_means) * beta));

    let mut likelihoods = Vec::with_capacity(j);
    let mut posterior_means = Vec::with_capacity(j);
    let mut posterior_covs = Vec::with_capacity(j);
    for m in &prior_means {
        let h = sensor.jacobian(m)?;
        let s = symmetrize(&(&h * &prior_cov * h.transpose() + sensor.noise_cov()));
        let s_inv = s.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let gain = &prior_cov * h.transpose() * &s_inv;
        let nu = sensor.innovation(z, &sensor.measure(m)?);
        let det = s.determinant();
        if !(det > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let q = nu.dot(&(&s_inv * &nu));
        let norm = (2.0 * std::f64::consts::PI).powi(nu.len() as i32) * det;
        likelihoods.push((-0.5 * q).exp() / norm.sqrt());
        posterior_means.push(m + &gain * &nu);
        posterior_covs.push(floor_covariance(&(&prior_cov - &gain * &h * &prior_cov)));
    }
    let w0 = 1.0 / j as f64;
    let total: f64 = likelihoods.iter().map(|l| w0 * l).sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveMass(total));
    }
    let weights: Vec<f64> = likelihoods.iter().map(|l| w0 * l / total).collect();

    let mut cumulative = Vec::with_capacity(j);
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut factors: Vec<Option<Matrix>> = vec![None; j];
    let mut resampled = Vec::with_capacity(j);
    for _ in 0..j {
        let u: f64 = rng.sample(Open01);
        let mut ell = j - 1;
        for (i, c) in cumulative.iter().enumerate() {
            if *c >= u {
                ell = i;
                break;
            }
        }
        while weights[ell] == 0.0 && ell > 0 {
            ell -= 1;
        }
        if factors[ell].is_none() {
            let chol = nalgebra::Cholesky::new(floor_covariance(&posterior_covs[ell]))
                .ok_or(Error::NotPositiveDefinite)?;
            factors[ell] = Some(chol.l());
        }
        let l = factors[ell].as_ref().expect("factor cached above");
        let n = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        resampled.push(&posterior_means[ell] + l * n);
    }
    Ok(EngmfStep {
        prior_means,
        prior_cov,
        weights,
        posterior_means,
        posterior_covs,
        particles: resampled,
    })
}
