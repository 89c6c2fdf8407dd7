//! Ensemble Gaussian-mixture PHD filter.
//!
//! The posterior intensity is carried as equally weighted particles. Prediction
//! propagates them, turns survivors and births into two kernel density mixtures,
//! redraws a single sample set from their union and rebuilds one uniform-weight
//! mixture with a shared Silverman covariance scaled by the expected cardinality.
//! The update is the Gaussian-mixture PHD update, after which the posterior mixture
//! is resampled back to a fixed particle count.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filter::{FilterKind, PhdFilter, StepOutput};
use crate::gaussmix::{kde_from_particles, sample_mixture, GaussianMixture, TwoMixtureSampler};
use crate::kmeans::KMeansParams;
use crate::models::Models;
use crate::phd_gm::gm_update;
use crate::phd_smc::{cluster_extract_with, ParticleSet};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngmPhdConfig {
    pub particle_count: usize,
    pub kmeans: KMeansParams,
}

impl Default for EngmPhdConfig {
    fn default() -> Self {
        Self { particle_count: 250, kmeans: KMeansParams::default() }
    }
}

/// Posterior particles with uniform weights summing to the cardinality estimate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngmPhdState {
    particles: ParticleSet,
}

impl EngmPhdState {
    pub fn new(states: Vec<Vector>, mass: f64) -> Result<Self> {
        if mass < 0.0 {
            return Err(Error::NonPositiveMass(mass));
        }
        Ok(Self { particles: ParticleSet::uniform(states, mass)? })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    pub fn mass(&self) -> f64 {
        self.particles.mass()
    }
}

/// Prior intensity as a uniform-weight Gaussian mixture.
///
/// Without births the survivor KDE is returned directly; otherwise
/// `J_{k−1} + J_γ` samples are drawn from the survivor and birth KDE mixtures and
/// re-smoothed with mass `p_S·N̂ + N̂_γ`.
pub fn engm_predict<R: Rng + ?Sized>(
    state: &EngmPhdState,
    models: &Models,
    rng: &mut R,
) -> Result<GaussianMixture> {
    let dim = models.birth.mean.len();
    let survivors: Vec<Vector> = state
        .particles
        .states()
        .iter()
        .map(|x| models.motion.propagate_noisy(x, rng))
        .collect::<Result<_>>()?;
    let survivor_mass = models.detection.p_survive * state.mass();
    let survivor_kde = if !survivors.is_empty() && survivor_mass > 0.0 {
        kde_from_particles(&survivors, survivor_mass)?
    } else {
        GaussianMixture::new(dim)
    };

    let births = models.birth.sample_states(rng)?;
    let birth_mass = models.birth.mass();
    if births.is_empty() || !(birth_mass > 0.0) {
        return Ok(survivor_kde);
    }
    let birth_kde = kde_from_particles(&births, birth_mass)?;

    let count = survivors.len() + births.len();
    let mut sampler = TwoMixtureSampler::new(&survivor_kde, &birth_kde)?;
    let fused = (0..count).map(|_| sampler.sample(rng)).collect::<Result<Vec<_>>>()?;
    kde_from_particles(&fused, survivor_kde.mass() + birth_kde.mass())
}

/// Gaussian-mixture PHD update of the KDE prior.
pub fn engm_update(prior: &GaussianMixture, scan: &[Vector], models: &Models) -> Result<GaussianMixture> {
    gm_update(prior, scan, models)
}

/// Draws `count` i.i.d. samples from the posterior mixture and gives them uniform
/// weights summing to the posterior mass.
pub fn engm_resample<R: Rng + ?Sized>(
    posterior: &GaussianMixture,
    count: usize,
    rng: &mut R,
) -> Result<EngmPhdState> {
    let mass = posterior.mass();
    if !(mass > 0.0) {
        return Err(Error::NonPositiveMass(mass));
    }
    let samples = sample_mixture(posterior, count, rng)?;
    EngmPhdState::new(samples, mass)
}

pub fn engm_extract<R: Rng + ?Sized>(state: &EngmPhdState, rng: &mut R) -> (usize, Vec<Vector>) {
    cluster_extract_with(&state.particles, KMeansParams::default(), rng)
}

#[derive(Debug, Clone)]
pub struct EngmPhdFilter {
    config: EngmPhdConfig,
    models: Models,
    state: EngmPhdState,
}

impl EngmPhdFilter {
    pub fn new(config: EngmPhdConfig, models: Models, initial: EngmPhdState) -> Self {
        Self { config, models, state: initial }
    }

    pub fn state(&self) -> &EngmPhdState {
        &self.state
    }
}

impl PhdFilter for EngmPhdFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Engm
    }

    fn step(&mut self, scan: &[Vector], rng: &mut dyn RngCore) -> Result<StepOutput> {
        let prior = engm_predict(&self.state, &self.models, &mut *rng)?;
        let predicted_mass = prior.mass();
        let posterior = if prior.is_empty() {
            prior
        } else {
            engm_update(&prior, scan, &self.models)?
        };
        let updated_mass = posterior.mass();
        self.state = if updated_mass > 0.0 {
            engm_resample(&posterior, self.config.particle_count, &mut *rng)?
        } else {
            EngmPhdState::empty()
        };
        let (n_hat, states) = cluster_extract_with(&self.state.particles, self.config.kmeans, &mut *rng);
        Ok(StepOutput {
            predicted_mass,
            updated_mass,
            posterior_mass: self.state.mass(),
            n_hat,
            states,
            n_components: self.state.particle_count(),
        })
    }

    fn mass(&self) -> f64 {
        self.state.mass()
    }
}
