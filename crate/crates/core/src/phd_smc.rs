//! Sequential Monte Carlo PHD filter: the intensity is a weighted Dirac mixture
//! whose total weight is the expected cardinality.

use rand::{Rng, RngCore};
use rand_distr::Open01;

use crate::error::{Error, Result};
use crate::filter::{round_half_up, FilterKind, PhdFilter, StepOutput};
use crate::gaussmix::{draw_gaussian, select_component, GaussianComponent};
use crate::kmeans::{kmeans, KMeansParams};
use crate::linalg::{cholesky, PreparedGaussian};
use crate::models::Models;
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    states: Vec<Vector>,
    weights: Vec<f64>,
    /// Total weight. Uniform sets store the requested mass itself, so
    /// resampling preserves mass bit for bit.
    mass: f64,
}

impl ParticleSet {
    pub fn new(states: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if states.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("particle weight {w} is not a finite nonnegative value")));
        }
        if let Some(first) = states.first() {
            let dim = first.len();
            if let Some(s) = states.iter().find(|s| s.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
        }
        Ok(Self::from_raw(states, weights))
    }

    fn from_raw(states: Vec<Vector>, weights: Vec<f64>) -> Self {
        let mass = weights.iter().sum();
        Self { states, weights, mass }
    }

    /// States sharing `mass` equally.
    pub fn uniform(states: Vec<Vector>, mass: f64) -> Result<Self> {
        if states.is_empty() {
            return Ok(Self::empty());
        }
        let w = mass / states.len() as f64;
        let weights = vec![w; states.len()];
        let mut set = Self::new(states, weights)?;
        set.mass = mass;
        Ok(set)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `count` draws from a single Gaussian sharing `mass`.
    pub fn from_gaussian<R: Rng + ?Sized>(
        component: &GaussianComponent,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let lower = cholesky(&component.cov)?.l();
        let states = (0..count).map(|_| draw_gaussian(&component.mean, &lower, rng)).collect();
        Self::uniform(states, component.weight)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn into_parts(self) -> (Vec<Vector>, Vec<f64>) {
        (self.states, self.weights)
    }

    fn append(&mut self, other: ParticleSet) {
        self.states.extend(other.states);
        self.weights.extend(other.weights);
        self.mass += other.mass;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcPhdConfig {
    pub particle_count: usize,
    pub resampling: ResamplingScheme,
    pub kmeans: KMeansParams,
}

impl Default for SmcPhdConfig {
    fn default() -> Self {
        Self {
            particle_count: 250,
            resampling: ResamplingScheme::Multinomial,
            kmeans: KMeansParams::default(),
        }
    }
}

/// Propagates survivors through the dynamics (plus process noise) with weight
/// `p_S·w`, then appends the birth particles.
pub fn smc_predict<R: Rng + ?Sized>(
    posterior: &ParticleSet,
    models: &Models,
    rng: &mut R,
) -> Result<ParticleSet> {
    let p_s = models.detection.p_survive;
    let mut states = Vec::with_capacity(posterior.len() + models.birth.count);
    let mut weights = Vec::with_capacity(posterior.len() + models.birth.count);
    for (x, w) in posterior.states.iter().zip(&posterior.weights) {
        states.push(models.motion.propagate_noisy(x, rng)?);
        weights.push(p_s * w);
    }
    let mut predicted = ParticleSet::from_raw(states, weights);
    predicted.append(models.birth.sample_particles(rng)?);
    Ok(predicted)
}

/// PHD weight update. States are unchanged; each weight becomes its missed-detection
/// share plus its share of every measurement.
pub fn smc_update(predicted: &ParticleSet, scan: &[Vector], models: &Models) -> Result<ParticleSet> {
    let p_d = models.detection.p_detect;
    let kappa = models.kappa();
    let sensor = &models.sensor;
    let noise = PreparedGaussian::new(sensor.noise_cov())?;
    // Particles at singular geometry (the sensor origin) cannot be detected.
    let predicted_z: Vec<Option<Vector>> =
        predicted.states.iter().map(|x| sensor.measure(x).ok()).collect();

    let mut weights: Vec<f64> = predicted.weights.iter().map(|w| (1.0 - p_d) * w).collect();
    if p_d > 0.0 {
        let mut terms = vec![0.0; predicted.len()];
        for z in scan {
            let mut denom = kappa;
            for ((t, zhat), w) in terms.iter_mut().zip(&predicted_z).zip(&predicted.weights) {
                *t = match zhat {
                    Some(zh) => p_d * noise.density(&sensor.innovation(z, zh)) * w,
                    None => 0.0,
                };
                denom += *t;
            }
            if denom > 0.0 {
                for (w, t) in weights.iter_mut().zip(&terms) {
                    *w += t / denom;
                }
            }
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("particle weights"));
    }
    Ok(ParticleSet::from_raw(predicted.states.clone(), weights))
}

fn resample_indices<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonPositiveMass(total));
    }
    let mut acc = 0.0;
    let mut last_positive = 0;
    let cumulative: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if *w > 0.0 {
                last_positive = i;
            }
            acc += w / total;
            acc
        })
        .collect();
    let indices = match scheme {
        ResamplingScheme::Multinomial => (0..count)
            .map(|_| select_component(&cumulative, last_positive, rng.sample(Open01)))
            .collect(),
        ResamplingScheme::Systematic => {
            let u0: f64 = rng.sample::<f64, _>(Open01) / count as f64;
            (0..count)
                .map(|j| select_component(&cumulative, last_positive, u0 + j as f64 / count as f64))
                .collect()
        }
    };
    Ok(indices)
}

/// Multinomial resampling to `count` particles with uniform weights summing to the input mass.
pub fn smc_resample<R: Rng + ?Sized>(
    updated: &ParticleSet,
    count: usize,
    rng: &mut R,
) -> Result<ParticleSet> {
    smc_resample_with(updated, count, ResamplingScheme::Multinomial, rng)
}

pub fn smc_resample_with<R: Rng + ?Sized>(
    updated: &ParticleSet,
    count: usize,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Result<ParticleSet> {
    let mass = updated.mass();
    let indices = resample_indices(&updated.weights, count, scheme, rng)?;
    let states = indices.into_iter().map(|i| updated.states[i].clone()).collect();
    ParticleSet::uniform(states, mass)
}

/// Cardinality `round(mass)` and that many k-means centers of the particles.
pub fn cluster_extract<R: Rng + ?Sized>(particles: &ParticleSet, rng: &mut R) -> (usize, Vec<Vector>) {
    cluster_extract_with(particles, KMeansParams::default(), rng)
}

pub fn cluster_extract_with<R: Rng + ?Sized>(
    particles: &ParticleSet,
    params: KMeansParams,
    rng: &mut R,
) -> (usize, Vec<Vector>) {
    let n_hat = round_half_up(particles.mass());
    if n_hat == 0 || particles.is_empty() {
        return (n_hat, Vec::new());
    }
    let clustering = kmeans(&particles.states, n_hat, params, rng);
    (n_hat, clustering.centers)
}

#[derive(Debug, Clone)]
pub struct SmcPhdFilter {
    config: SmcPhdConfig,
    models: Models,
    particles: ParticleSet,
}

impl SmcPhdFilter {
    pub fn new(config: SmcPhdConfig, models: Models, initial: ParticleSet) -> Self {
        Self { config, models, particles: initial }
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }
}

impl PhdFilter for SmcPhdFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Smc
    }

    fn step(&mut self, scan: &[Vector], rng: &mut dyn RngCore) -> Result<StepOutput> {
        let predicted = smc_predict(&self.particles, &self.models, &mut *rng)?;
        let predicted_mass = predicted.mass();
        let updated = smc_update(&predicted, scan, &self.models)?;
        let updated_mass = updated.mass();
        // An underflowed intensity restarts from the next step's births.
        self.particles = if updated_mass > 0.0 && !updated.is_empty() {
            smc_resample_with(&updated, self.config.particle_count, self.config.resampling, &mut *rng)?
        } else {
            ParticleSet::empty()
        };
        let (n_hat, states) = cluster_extract_with(&self.particles, self.config.kmeans, &mut *rng);
        Ok(StepOutput {
            predicted_mass,
            updated_mass,
            posterior_mass: self.particles.mass(),
            n_hat,
            states,
            n_components: self.particles.len(),
        })
    }

    fn mass(&self) -> f64 {
        self.particles.mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{default_models, quiet_models};
    use crate::models::{propagate_state, BirthModel, MeasurementModel, MotionModel};
    use crate::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn cloud(n: usize, center: &[f64], spread: f64, mass: f64, rng: &mut ChaCha8Rng) -> ParticleSet {
        let states = (0..n)
            .map(|_| Vector::from_fn(6, |i, _| center[i] + spread * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        ParticleSet::uniform(states, mass).unwrap()
    }

    #[test]
    fn construction_is_validated() {
        assert!(ParticleSet::new(vec![Vector::zeros(6)], vec![]).is_err());
        assert!(ParticleSet::new(vec![Vector::zeros(6)], vec![-0.1]).is_err());
        assert!(ParticleSet::new(vec![Vector::zeros(6), Vector::zeros(5)], vec![0.1, 0.1]).is_err());
        assert_eq!(ParticleSet::uniform(vec![Vector::zeros(6); 3], 0.3).unwrap().mass(), 0.3);
    }

    #[test]
    fn predict_mass_and_count() {
        let models = default_models();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let post = cloud(250, &[60.0, 60.0, 80.0, 0.0, 0.0, 1.0], 5.0, 1.7, &mut rng);
        let pred = smc_predict(&post, &models, &mut rng).unwrap();
        assert_eq!(pred.len(), 260);
        assert!((pred.mass() - (0.99 * 1.7 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn noise_free_predict_is_constant_velocity() {
        let mut models = default_models();
        models.motion = MotionModel::new(1.0, Matrix::zeros(6, 6), crate::models::Integrator::ClosedForm).unwrap();
        models.birth = BirthModel::none(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let post = cloud(20, &[10.0, 20.0, 30.0, 1.0, 2.0, 3.0], 3.0, 1.0, &mut rng);
        let pred = smc_predict(&post, &models, &mut rng).unwrap();
        for (a, b) in post.states().iter().zip(pred.states()) {
            assert_eq!(propagate_state(a, 1.0).unwrap(), *b);
        }
    }

    #[test]
    fn update_without_detection_keeps_weights() {
        let mut models = default_models();
        models.detection.p_detect = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred = cloud(30, &[60.0, 60.0, 80.0, 0.0, 0.0, 0.0], 5.0, 0.9, &mut rng);
        let z = crate::models::measure(&v(&[60.0, 60.0, 80.0, 0.0, 0.0, 0.0])).unwrap();
        let out = smc_update(&pred, &[z], &models).unwrap();
        assert_eq!(out.weights(), pred.weights());
    }

    #[test]
    fn single_particle_self_normalizes() {
        let sensor = MeasurementModel::radar(1.0, 0.01, 0.01).unwrap();
        let models = quiet_models(sensor, MotionModel::deterministic(1.0));
        let pred = ParticleSet::new(vec![v(&[50.0, 50.0, 50.0, 0.0, 0.0, 0.0])], vec![0.4]).unwrap();
        let z = crate::models::measure(&v(&[53.0, 49.0, 52.0, 0.0, 0.0, 0.0])).unwrap();
        let out = smc_update(&pred, &[z], &models).unwrap();
        assert!((out.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clutter_dominated_limit() {
        let mut models = default_models();
        models.clutter = models.clutter.clone().with_kappa(1e12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pred = cloud(50, &[60.0, 60.0, 80.0, 0.0, 0.0, 0.0], 5.0, 1.0, &mut rng);
        let scan: Vec<Vector> = (0..5)
            .map(|i| crate::models::measure(&v(&[60.0 + i as f64, 60.0, 80.0, 0.0, 0.0, 0.0])).unwrap())
            .collect();
        let out = smc_update(&pred, &scan, &models).unwrap();
        for (w, w0) in out.weights().iter().zip(pred.weights()) {
            let missed = 0.02 * w0;
            assert!(((w - missed) / missed).abs() < 1e-6);
        }
    }

    #[test]
    fn update_matches_kalman_posterior_mean() {
        // linear Gaussian: prior N(m, P) sampled with 10^4 particles, position sensor
        let sensor = MeasurementModel::position(2.0).unwrap();
        let models = quiet_models(sensor.clone(), MotionModel::deterministic(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = [10.0, 20.0, 30.0, 1.0, 1.0, 1.0];
        let pred = cloud(10_000, &m, 3.0, 1.0, &mut rng);
        let z = v(&[12.0, 19.0, 33.0]);
        let out = smc_update(&pred, std::slice::from_ref(&z), &models).unwrap();
        let total = out.mass();
        let mean = out.states().iter().zip(out.weights()).fold(Vector::zeros(6), |acc, (x, w)| acc + x * *w) / total;
        // scalar Kalman per position axis: prior var 9, noise var 4
        let gain = 9.0 / 13.0;
        let post_sd = (9.0 * 4.0 / 13.0f64).sqrt();
        for i in 0..3 {
            let kf = m[i] + gain * (z[i] - m[i]);
            // effective sample size is below 10^4 after weighting; allow for it
            let ess = total * total / out.weights().iter().map(|w| w * w).sum::<f64>();
            assert!((mean[i] - kf).abs() < 4.0 * post_sd / ess.sqrt(), "axis {i}: {} vs {kf}", mean[i]);
        }
    }

    #[test]
    fn resampling_preserves_mass_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let states: Vec<Vector> = (0..260).map(|i| Vector::from_element(6, i as f64)).collect();
        let weights: Vec<f64> = (0..260).map(|_| rng.random_range(0.0..0.02)).collect();
        let set = ParticleSet::new(states, weights).unwrap();
        for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Systematic] {
            let out = smc_resample_with(&set, 250, scheme, &mut rng).unwrap();
            assert_eq!(out.len(), 250);
            assert_eq!(out.mass(), set.mass());
            let w0 = out.weights()[0];
            assert!(out.weights().iter().all(|w| *w == w0));
        }
    }

    #[test]
    fn degenerate_weights_resample_to_one_state() {
        let states = vec![v(&[1.0; 6]), v(&[2.0; 6]), v(&[3.0; 6])];
        let set = ParticleSet::new(states, vec![1.0, 0.0, 0.0]).unwrap();
        let out = smc_resample(&set, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert!(out.states().iter().all(|x| *x == v(&[1.0; 6])));
    }

    #[test]
    fn multinomial_frequencies() {
        let set = ParticleSet::new(vec![v(&[0.0; 6]), v(&[1.0; 6])], vec![0.75, 0.25]).unwrap();
        let n = 100_000;
        let out = smc_resample(&set, n, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let first = out.states().iter().filter(|x| x[0] == 0.0).count() as f64 / n as f64;
        assert!((first - 0.75).abs() < 4.0 * (0.1875f64 / n as f64).sqrt(), "{first}");
    }

    #[test]
    fn zero_mass_cannot_be_resampled() {
        let set = ParticleSet::new(vec![v(&[0.0; 6])], vec![0.0]).unwrap();
        assert!(matches!(smc_resample(&set, 5, &mut ChaCha8Rng::seed_from_u64(9)), Err(Error::NonPositiveMass(_))));
    }

    #[test]
    fn extraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let light = cloud(100, &[0.0; 6], 1.0, 0.3, &mut rng);
        assert_eq!(cluster_extract(&light, &mut rng), (0, vec![]));

        let one = cloud(100, &[5.0, 6.0, 7.0, 0.0, 0.0, 0.0], 1.0, 1.2, &mut rng);
        let (n, centers) = cluster_extract(&one, &mut rng);
        assert_eq!(n, 1);
        let mean = one.states().iter().fold(Vector::zeros(6), |a, x| a + x) / 100.0;
        assert!((&centers[0] - mean).amax() < 1e-12);

        let a = cloud(100, &[0.0; 6], 1.0, 1.0, &mut rng);
        let b = cloud(100, &[100.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0, 1.0, &mut rng);
        let mut both = a.clone();
        both.append(b.clone());
        let (n, mut centers) = cluster_extract(&both, &mut rng);
        assert_eq!(n, 2);
        centers.sort_by(|x, y| x[0].total_cmp(&y[0]));
        let ma = a.states().iter().fold(Vector::zeros(6), |s, x| s + x) / 100.0;
        let mb = b.states().iter().fold(Vector::zeros(6), |s, x| s + x) / 100.0;
        assert!((&centers[0] - ma).amax() < 3.0);
        assert!((&centers[1] - mb).amax() < 3.0);
    }

    #[test]
    fn filter_keeps_particle_budget() {
        let models = default_models();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = cloud(250, &[0.0; 6], 1.0, 1e-16, &mut rng);
        let mut filter = SmcPhdFilter::new(SmcPhdConfig::default(), models.clone(), init);
        for _ in 0..5 {
            let z = crate::models::measure(&v(&[75.0, 75.0, 150.0, 0.0, 0.0, 0.0])).unwrap();
            let out = filter.step(&[z], &mut rng).unwrap();
            assert_eq!(out.n_components, 250);
            assert_eq!(out.posterior_mass, out.updated_mass);
        }
    }
}
