//! Gaussian-mixture PHD filter with extended-Kalman component updates
//! (the EK-PHD variant) and prune/merge/cap mixture management.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filter::{round_half_up, FilterKind, PhdFilter, StepOutput};
use crate::gaussmix::{GaussianComponent, GaussianMixture};
use crate::linalg::{cholesky, floor_covariance, symmetrize, PreparedGaussian};
use crate::models::Models;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtractionMode {
    /// Means of the `round(mass)` heaviest components.
    TopN,
    /// Means of every component heavier than the threshold.
    WeightThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmPhdConfig {
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
    pub extraction: ExtractionMode,
}

impl Default for GmPhdConfig {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-5,
            merge_threshold: 4.0,
            max_components: 250,
            extraction: ExtractionMode::TopN,
        }
    }
}

impl GmPhdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prune_threshold >= 0.0) {
            return Err(Error::Domain("prune_threshold must be >= 0".into()));
        }
        if !(self.merge_threshold >= 0.0) {
            return Err(Error::Domain("merge_threshold must be >= 0".into()));
        }
        if self.max_components < 1 {
            return Err(Error::Domain("max_components must be >= 1".into()));
        }
        Ok(())
    }
}

/// Survived, spawned and birthed components, in that order. The component count is
/// `J·(1 + J_β) + J_γ`.
pub fn gm_predict<R: Rng + ?Sized>(
    posterior: &GaussianMixture,
    models: &Models,
    rng: &mut R,
) -> Result<GaussianMixture> {
    let dim = posterior.dim();
    let f = models.motion.transition_matrix();
    if f.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: f.nrows(), got: dim });
    }
    let q = models.motion.process_noise();
    let p_s = models.detection.p_survive;
    let spawn = &models.spawn.components;
    let mut out = GaussianMixture::with_capacity(
        dim,
        posterior.len() * (1 + spawn.len()) + models.birth.count,
    );
    let propagated: Vec<Matrix> = posterior.iter().map(|c| &f * &c.cov * f.transpose()).collect();
    for (c, fpf) in posterior.iter().zip(&propagated) {
        out.push(GaussianComponent::new(
            p_s * c.weight,
            models.motion.propagate(&c.mean)?,
            symmetrize(&(fpf + q)),
        ))?;
    }
    for (c, fpf) in posterior.iter().zip(&propagated) {
        let fm = &f * &c.mean;
        for s in spawn {
            out.push(GaussianComponent::new(
                c.weight * s.weight,
                &fm + &s.offset,
                symmetrize(&(fpf + &s.cov)),
            ))?;
        }
    }
    out.extend(models.birth.sample_components(rng)?)?;
    Ok(out)
}

/// Per-component EKF quantities that do not depend on the measurement.
struct Linearization {
    predicted_z: Vector,
    gain: Matrix,
    cov: Matrix,
    innovation: PreparedGaussian,
}

fn linearize(c: &GaussianComponent, models: &Models) -> Result<Option<Linearization>> {
    let sensor = &models.sensor;
    let (predicted_z, h) = match (sensor.measure(&c.mean), sensor.jacobian(&c.mean)) {
        (Ok(z), Ok(h)) => (z, h),
        // undetectable at singular geometry
        (Err(Error::SingularGeometry(..)), _) | (_, Err(Error::SingularGeometry(..))) => return Ok(None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let hp = &h * &c.cov;
    let s = symmetrize(&(&hp * h.transpose() + sensor.noise_cov()));
    let chol = cholesky(&s)?;
    // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ
    let gain = chol.solve(&hp).transpose();
    let cov = floor_covariance(&(&c.cov - &gain * &hp));
    Ok(Some(Linearization {
        predicted_z,
        gain,
        cov,
        innovation: PreparedGaussian::new(&s)?,
    }))
}

/// Missed-detection copies with weight `(1 − p_D)·w`, followed by one EKF-updated copy of
/// every component per measurement. With `p_D = 0` only the missed-detection copies exist.
pub fn gm_update(prior: &GaussianMixture, scan: &[Vector], models: &Models) -> Result<GaussianMixture> {
    let p_d = models.detection.p_detect;
    let kappa = models.kappa();
    let dim = prior.dim();
    let n_meas = if p_d > 0.0 { scan.len() } else { 0 };
    let mut out = GaussianMixture::with_capacity(dim, prior.len() * (1 + n_meas));
    for c in prior.iter() {
        out.push(GaussianComponent::new((1.0 - p_d) * c.weight, c.mean.clone(), c.cov.clone()))?;
    }
    if n_meas == 0 {
        return Ok(out);
    }
    let linearized = prior
        .iter()
        .map(|c| linearize(c, models))
        .collect::<Result<Vec<_>>>()?;

    let mut weights = vec![0.0; prior.len()];
    let mut means: Vec<Vector> = Vec::with_capacity(prior.len());
    for z in scan {
        means.clear();
        let mut denom = kappa;
        for ((c, lin), w) in prior.iter().zip(&linearized).zip(weights.iter_mut()) {
            match lin {
                Some(l) => {
                    let nu = models.sensor.innovation(z, &l.predicted_z);
                    *w = p_d * c.weight * l.innovation.density(&nu);
                    means.push(&c.mean + &l.gain * nu);
                }
                None => {
                    *w = 0.0;
                    means.push(c.mean.clone());
                }
            }
            denom += *w;
        }
        for (((c, lin), w), mean) in prior.iter().zip(&linearized).zip(&weights).zip(means.drain(..)) {
            let weight = if denom > 0.0 { w / denom } else { 0.0 };
            let cov = lin.as_ref().map_or_else(|| c.cov.clone(), |l| l.cov.clone());
            out.push(GaussianComponent::new(weight, mean, cov))?;
        }
    }
    if out.iter().any(|c| !c.weight.is_finite()) {
        return Err(Error::NonFinite("updated weights"));
    }
    Ok(out)
}

/// Prunes light components, greedily merges neighbours of the heaviest remaining
/// component, caps the count and rescales so the total mass is unchanged.
///
/// Merge distance is the squared Mahalanobis distance in the seed's covariance.
/// Output components are ordered by the input index of their seed.
pub fn prune_merge_cap(mixture: &GaussianMixture, config: &GmPhdConfig) -> GaussianMixture {
    let dim = mixture.dim();
    let comps = mixture.components();
    if comps.is_empty() {
        return mixture.clone();
    }
    let total_mass = mixture.mass();

    let mut kept: Vec<usize> = (0..comps.len())
        .filter(|&i| comps[i].weight >= config.prune_threshold)
        .collect();
    if kept.is_empty() {
        let heaviest = (0..comps.len())
            .max_by(|&a, &b| comps[a].weight.total_cmp(&comps[b].weight).then(b.cmp(&a)))
            .expect("nonempty");
        kept.push(heaviest);
    }
    // heaviest first; stable sort keeps index order among ties
    kept.sort_by(|&a, &b| comps[b].weight.total_cmp(&comps[a].weight));

    let mut used = vec![false; kept.len()];
    let mut merged: Vec<(usize, GaussianComponent)> = Vec::new();
    for s in 0..kept.len() {
        if used[s] {
            continue;
        }
        used[s] = true;
        let seed = &comps[kept[s]];
        let mut group = vec![kept[s]];
        if let Ok(chol) = cholesky(&seed.cov) {
            for t in (s + 1)..kept.len() {
                if used[t] {
                    continue;
                }
                let d = &comps[kept[t]].mean - &seed.mean;
                let dist2 = d.dot(&chol.solve(&d));
                if dist2 <= config.merge_threshold {
                    used[t] = true;
                    group.push(kept[t]);
                }
            }
        }
        let component = if group.len() == 1 {
            seed.clone()
        } else {
            moment_match(&group.iter().map(|&i| &comps[i]).collect::<Vec<_>>(), dim)
        };
        merged.push((kept[s], component));
    }

    if merged.len() > config.max_components {
        merged.sort_by(|a, b| b.1.weight.total_cmp(&a.1.weight).then(a.0.cmp(&b.0)));
        merged.truncate(config.max_components);
    }
    merged.sort_by_key(|(seed, _)| *seed);

    let mut out: Vec<GaussianComponent> = merged.into_iter().map(|(_, c)| c).collect();
    let kept_mass: f64 = out.iter().map(|c| c.weight).sum();
    if kept_mass > 0.0 {
        let factor = total_mass / kept_mass;
        if factor != 1.0 {
            for c in &mut out {
                c.weight *= factor;
            }
        }
    }
    GaussianMixture::from_components(dim, out).expect("dimensions preserved")
}

/// Moment-matched single Gaussian for a weighted group.
fn moment_match(group: &[&GaussianComponent], dim: usize) -> GaussianComponent {
    let weight: f64 = group.iter().map(|c| c.weight).sum();
    if !(weight > 0.0) {
        return group[0].clone();
    }
    let mean = group.iter().fold(Vector::zeros(dim), |acc, c| acc + &c.mean * c.weight) / weight;
    let mut cov = Matrix::zeros(dim, dim);
    for c in group {
        let d = &mean - &c.mean;
        cov += (&c.cov + &d * d.transpose()) * c.weight;
    }
    GaussianComponent::new(weight, mean, symmetrize(&(cov / weight)))
}

/// Cardinality estimate and extracted states.
pub fn gm_extract(mixture: &GaussianMixture, config: &GmPhdConfig) -> (usize, Vec<Vector>) {
    let comps = mixture.components();
    match config.extraction {
        ExtractionMode::TopN => {
            let n_hat = round_half_up(mixture.mass());
            let mut order: Vec<usize> = (0..comps.len()).collect();
            order.sort_by(|&a, &b| comps[b].weight.total_cmp(&comps[a].weight));
            let states = order.iter().take(n_hat).map(|&i| comps[i].mean.clone()).collect();
            (n_hat, states)
        }
        ExtractionMode::WeightThreshold(tau) => {
            let states: Vec<Vector> =
                comps.iter().filter(|c| c.weight > tau).map(|c| c.mean.clone()).collect();
            (states.len(), states)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmPhdFilter {
    config: GmPhdConfig,
    models: Models,
    mixture: GaussianMixture,
}

impl GmPhdFilter {
    pub fn new(config: GmPhdConfig, models: Models, initial: GaussianMixture) -> Self {
        Self { config, models, mixture: initial }
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }
}

impl PhdFilter for GmPhdFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Gm
    }

    fn step(&mut self, scan: &[Vector], rng: &mut dyn RngCore) -> Result<StepOutput> {
        let predicted = gm_predict(&self.mixture, &self.models, &mut *rng)?;
        let predicted_mass = predicted.mass();
        let updated = gm_update(&predicted, scan, &self.models)?;
        let updated_mass = updated.mass();
        self.mixture = prune_merge_cap(&updated, &self.config);
        let (n_hat, states) = gm_extract(&self.mixture, &self.config);
        Ok(StepOutput {
            predicted_mass,
            updated_mass,
            posterior_mass: self.mixture.mass(),
            n_hat,
            states,
            n_components: self.mixture.len(),
        })
    }

    fn mass(&self) -> f64 {
        self.mixture.mass()
    }
}
