//! Gaussian-mixture intensities: mass accounting, kernel density construction from
//! particles and the mixture samplers used for resampling.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, floor_covariance, sample_covariance, PreparedGaussian};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    /// Expected-target mass carried by this component.
    pub weight: f64,
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vector, cov: Matrix) -> Self {
        Self { weight, mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A weighted sum of Gaussians. When it represents an intensity function its total
/// weight is the expected number of targets.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(dim: usize) -> Self {
        Self { dim, components: Vec::new() }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        Self { dim, components: Vec::with_capacity(capacity) }
    }

    pub fn from_components(dim: usize, components: Vec<GaussianComponent>) -> Result<Self> {
        for c in &components {
            check_component(dim, c)?;
        }
        Ok(Self { dim, components })
    }

    pub fn push(&mut self, component: GaussianComponent) -> Result<()> {
        check_component(self.dim, &component)?;
        self.components.push(component);
        Ok(())
    }

    pub fn extend(&mut self, other: GaussianMixture) -> Result<()> {
        if other.dim != self.dim && !other.is_empty() {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.components.extend(other.components);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent> {
        self.components.iter()
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    /// Sum of component weights.
    pub fn mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

fn check_component(dim: usize, c: &GaussianComponent) -> Result<()> {
    if c.mean.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: c.mean.len() });
    }
    if c.cov.nrows() != dim || c.cov.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: c.cov.nrows() });
    }
    Ok(())
}

pub fn mixture_mass(mixture: &GaussianMixture) -> f64 {
    mixture.mass()
}

/// Silverman's rule-of-thumb bandwidth `(4/(n+2))^{2/(n+4)} · J^{−2/(n+4)}`.
pub fn silverman_bandwidth(dim: usize, count: usize) -> Result<f64> {
    if dim < 1 {
        return Err(Error::Domain(format!("bandwidth dimension must be >= 1, got {dim}")));
    }
    if count < 1 {
        return Err(Error::Domain(format!("bandwidth sample count must be >= 1, got {count}")));
    }
    let n = dim as f64;
    let exponent = 2.0 / (n + 4.0);
    Ok((4.0 / (n + 2.0)).powf(exponent) * (count as f64).powf(-exponent))
}

/// Kernel bandwidth with the multi-target cardinality scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthParams {
    pub dim: usize,
    pub count: usize,
    /// Estimated cardinality; 1 for single-target use.
    pub cardinality_scale: f64,
}

impl BandwidthParams {
    /// Factor applied to the sample covariance: `β_Silv / N̂`.
    pub fn covariance_scale(&self) -> Result<f64> {
        if !(self.cardinality_scale > 0.0) {
            return Err(Error::NonPositiveMass(self.cardinality_scale));
        }
        Ok(silverman_bandwidth(self.dim, self.count)? / self.cardinality_scale)
    }
}

/// Places one equally weighted Gaussian on every state. All components share the
/// covariance `(β_Silv / mass) · SampleCov(states)` and the weights sum to `mass`.
pub fn kde_from_particles(states: &[Vector], mass: f64) -> Result<GaussianMixture> {
    if states.is_empty() {
        return Err(Error::Empty("kde states"));
    }
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::NonPositiveMass(mass));
    }
    let dim = states[0].len();
    let count = states.len();
    let scale = BandwidthParams { dim, count, cardinality_scale: mass }.covariance_scale()?;
    let cov = floor_covariance(&(sample_covariance(states)? * scale));
    let weight = mass / count as f64;
    let components = states
        .iter()
        .map(|s| GaussianComponent::new(weight, s.clone(), cov.clone()))
        .collect();
    Ok(GaussianMixture { dim, components })
}

/// Multivariate normal density `N(x; mean, cov)`; the covariance is floored first.
pub fn eval_gaussian(x: &Vector, mean: &Vector, cov: &Matrix) -> Result<f64> {
    if x.len() != mean.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: x.len() });
    }
    let g = PreparedGaussian::new(&floor_covariance(cov))?;
    Ok(g.density(&(x - mean)))
}

/// Smallest index whose cumulative normalized weight is `≥ u`. Roundoff that leaves
/// the final cumulative sum below `u` falls back to the last positive-weight index.
pub fn select_component(cumulative: &[f64], last_positive: usize, u: f64) -> usize {
    let idx = cumulative.partition_point(|&c| c < u);
    idx.min(last_positive)
}

/// `mean + L·n` with `n` a vector of standard normal draws.
pub fn draw_gaussian<R: Rng + ?Sized>(mean: &Vector, lower: &Matrix, rng: &mut R) -> Vector {
    let noise = Vector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + lower * noise
}

/// Draws from a single Gaussian mixture: pick a component by a uniform variate
/// against the cumulative normalized weights, then sample that component.
///
/// Normalization happens on the sampler's own copy of the weights, so the mixture's
/// mass is untouched. Cholesky factors are computed lazily for selected components.
#[derive(Debug)]
pub struct MixtureSampler<'a> {
    mixture: &'a GaussianMixture,
    cumulative: Vec<f64>,
    last_positive: usize,
    factors: Vec<Option<Matrix>>,
}

impl<'a> MixtureSampler<'a> {
    pub fn new(mixture: &'a GaussianMixture) -> Result<Self> {
        if mixture.is_empty() {
            return Err(Error::Empty("mixture"));
        }
        let total = mixture.mass();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NonPositiveMass(total));
        }
        let mut acc = 0.0;
        let mut last_positive = 0;
        let mut cumulative = Vec::with_capacity(mixture.len());
        for (i, c) in mixture.iter().enumerate() {
            if c.weight < 0.0 {
                return Err(Error::Domain(format!("negative weight {} at component {i}", c.weight)));
            }
            if c.weight > 0.0 {
                last_positive = i;
            }
            acc += c.weight / total;
            cumulative.push(acc);
        }
        Ok(Self {
            mixture,
            cumulative,
            last_positive,
            factors: vec![None; mixture.len()],
        })
    }

    pub fn select(&self, u: f64) -> usize {
        select_component(&self.cumulative, self.last_positive, u)
    }

    pub fn draw_component<R: Rng + ?Sized>(&mut self, index: usize, rng: &mut R) -> Result<Vector> {
        if self.factors[index].is_none() {
            let cov = floor_covariance(&self.mixture.components[index].cov);
            self.factors[index] = Some(cholesky(&cov)?.l());
        }
        let lower = self.factors[index].as_ref().expect("factor cached above");
        Ok(draw_gaussian(&self.mixture.components[index].mean, lower, rng))
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vector> {
        let u: f64 = rng.sample(Open01);
        let index = self.select(u);
        self.draw_component(index, rng)
    }
}

/// `count` i.i.d. draws from a mixture, weights normalized internally.
pub fn sample_mixture<R: Rng + ?Sized>(
    mixture: &GaussianMixture,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    let mut sampler = MixtureSampler::new(mixture)?;
    (0..count).map(|_| sampler.sample(rng)).collect()
}

/// Draws from the union of two mixtures, choosing the first with probability
/// `W₁ / (W₁ + W₂)` and sampling within the chosen one.
#[derive(Debug)]
pub struct TwoMixtureSampler<'a> {
    first_share: f64,
    first: Option<MixtureSampler<'a>>,
    second: Option<MixtureSampler<'a>>,
}

impl<'a> TwoMixtureSampler<'a> {
    pub fn new(first: &'a GaussianMixture, second: &'a GaussianMixture) -> Result<Self> {
        let w1 = first.mass();
        let w2 = second.mass();
        if w1 < 0.0 || w2 < 0.0 || !(w1 + w2 > 0.0) {
            return Err(Error::NonPositiveMass(w1 + w2));
        }
        let first_sampler = if w1 > 0.0 { Some(MixtureSampler::new(first)?) } else { None };
        let second_sampler = if w2 > 0.0 { Some(MixtureSampler::new(second)?) } else { None };
        Ok(Self {
            first_share: w1 / (w1 + w2),
            first: first_sampler,
            second: second_sampler,
        })
    }

    /// `true` when the uniform variate selects the first mixture.
    pub fn selects_first(&self, u: f64) -> bool {
        u < self.first_share
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vector> {
        let u: f64 = rng.sample(Open01);
        let chosen = if self.selects_first(u) { &mut self.first } else { &mut self.second };
        chosen
            .as_mut()
            .expect("a zero-mass mixture is never selected")
            .sample(rng)
    }
}

pub fn sample_two_mixtures<R: Rng + ?Sized>(
    first: &GaussianMixture,
    second: &GaussianMixture,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    let mut sampler = TwoMixtureSampler::new(first, second)?;
    (0..count).map(|_| sampler.sample(rng)).collect()
}
