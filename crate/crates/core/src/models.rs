//! Target dynamics, radar measurement, birth/spawn intensities and clutter.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussmix::{draw_gaussian, GaussianComponent, GaussianMixture};
use crate::integrator::rk87_step;
use crate::linalg::{cholesky, symmetrize, wrap_angle};
use crate::phd_smc::ParticleSet;
use crate::{Matrix, Vector};

/// `[r_x, r_y, r_z, v_x, v_y, v_z]`.
pub const STATE_DIM: usize = 6;
/// `[ρ, α, ε]` for the radar, `[r_x, r_y, r_z]` for the position sensor.
pub const MEAS_DIM: usize = 3;

fn check_state(x: &Vector) -> Result<()> {
    if x.len() != STATE_DIM {
        return Err(Error::DimensionMismatch { expected: STATE_DIM, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    Ok(())
}

/// Constant-velocity propagation in closed form.
pub fn propagate_state(x: &Vector, dt: f64) -> Result<Vector> {
    check_state(x)?;
    let mut out = x.clone();
    for i in 0..3 {
        out[i] += x[i + 3] * dt;
    }
    Ok(out)
}

fn cv_derivative(_t: f64, y: &Vector) -> Vector {
    let mut d = Vector::zeros(STATE_DIM);
    for i in 0..3 {
        d[i] = y[i + 3];
    }
    d
}

/// Constant-velocity propagation through one RK8(7) step of length `dt`.
pub fn propagate_state_rk87(x: &Vector, dt: f64) -> Result<Vector> {
    check_state(x)?;
    Ok(rk87_step(cv_derivative, 0.0, x, dt))
}

/// `[[I₃, dt·I₃], [0, I₃]]`.
pub fn transition_matrix(dt: f64) -> Matrix {
    let mut f = Matrix::identity(STATE_DIM, STATE_DIM);
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

/// Discrete white-noise acceleration covariance with per-axis standard deviation `sigma_a`.
pub fn white_noise_acceleration(sigma_a: f64, dt: f64) -> Matrix {
    let var = sigma_a * sigma_a;
    let mut q = Matrix::zeros(STATE_DIM, STATE_DIM);
    for i in 0..3 {
        q[(i, i)] = var * dt.powi(4) / 4.0;
        q[(i, i + 3)] = var * dt.powi(3) / 2.0;
        q[(i + 3, i)] = var * dt.powi(3) / 2.0;
        q[(i + 3, i + 3)] = var * dt * dt;
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    RungeKutta87,
    ClosedForm,
}

#[derive(Debug, Clone)]
pub struct MotionModel {
    dt: f64,
    process_noise: Matrix,
    /// Symmetric square root of Q, absent when Q = 0.
    noise_root: Option<Matrix>,
    integrator: Integrator,
}

impl MotionModel {
    pub fn new(dt: f64, process_noise: Matrix, integrator: Integrator) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        if process_noise.nrows() != STATE_DIM || process_noise.ncols() != STATE_DIM {
            return Err(Error::DimensionMismatch { expected: STATE_DIM, got: process_noise.nrows() });
        }
        let q = symmetrize(&process_noise);
        let eig = SymmetricEigen::new(q.clone());
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.min() < -1e-10 * scale {
            return Err(Error::Domain("process noise covariance is not PSD".into()));
        }
        let noise_root = if q.iter().all(|&v| v == 0.0) {
            None
        } else {
            let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            let v = &eig.eigenvectors;
            Some(v * Matrix::from_diagonal(&sqrt_vals) * v.transpose())
        };
        Ok(Self { dt, process_noise: q, noise_root, integrator })
    }

    /// Noise-free constant-velocity model.
    pub fn deterministic(dt: f64) -> Self {
        Self::new(dt, Matrix::zeros(STATE_DIM, STATE_DIM), Integrator::default())
            .expect("zero process noise is valid")
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn process_noise(&self) -> &Matrix {
        &self.process_noise
    }

    pub fn has_noise(&self) -> bool {
        self.noise_root.is_some()
    }

    pub fn transition_matrix(&self) -> Matrix {
        transition_matrix(self.dt)
    }

    pub fn propagate(&self, x: &Vector) -> Result<Vector> {
        match self.integrator {
            Integrator::RungeKutta87 => propagate_state_rk87(x, self.dt),
            Integrator::ClosedForm => propagate_state(x, self.dt),
        }
    }

    /// Propagates and adds a `N(0, Q)` draw. Consumes no randomness when Q = 0.
    pub fn propagate_noisy<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<Vector> {
        let mut out = self.propagate(x)?;
        if let Some(root) = &self.noise_root {
            let n = Vector::from_fn(STATE_DIM, |_, _| rng.sample::<f64, _>(StandardNormal));
            out += root * n;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensorKind {
    /// Range, azimuth and elevation from a radar at the origin.
    #[default]
    Radar,
    /// Direct position observation; linear, used for Kalman cross-checks.
    Position,
}

#[derive(Debug, Clone)]
pub struct MeasurementModel {
    kind: SensorKind,
    noise_cov: Matrix,
    noise_root: Matrix,
}

impl MeasurementModel {
    pub fn new(kind: SensorKind, noise_cov: Matrix) -> Result<Self> {
        if noise_cov.nrows() != MEAS_DIM || noise_cov.ncols() != MEAS_DIM {
            return Err(Error::DimensionMismatch { expected: MEAS_DIM, got: noise_cov.nrows() });
        }
        let noise_root = cholesky(&noise_cov)?.l();
        Ok(Self { kind, noise_cov, noise_root })
    }

    /// Radar with diagonal noise; angle deviations in radians.
    pub fn radar(sigma_range: f64, sigma_azimuth: f64, sigma_elevation: f64) -> Result<Self> {
        let r = Matrix::from_diagonal(&Vector::from_vec(vec![
            sigma_range * sigma_range,
            sigma_azimuth * sigma_azimuth,
            sigma_elevation * sigma_elevation,
        ]));
        Self::new(SensorKind::Radar, r)
    }

    pub fn position(sigma: f64) -> Result<Self> {
        Self::new(SensorKind::Position, Matrix::identity(MEAS_DIM, MEAS_DIM) * (sigma * sigma))
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn noise_cov(&self) -> &Matrix {
        &self.noise_cov
    }

    pub fn noise_root(&self) -> &Matrix {
        &self.noise_root
    }

    pub fn measure(&self, x: &Vector) -> Result<Vector> {
        match self.kind {
            SensorKind::Radar => measure(x),
            SensorKind::Position => Ok(x.rows(0, 3).into_owned()),
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        match self.kind {
            SensorKind::Radar => measurement_jacobian(x),
            SensorKind::Position => Ok(Matrix::identity(MEAS_DIM, STATE_DIM)),
        }
    }

    /// `z − ẑ`, with the azimuth difference wrapped to `(−π, π]` for the radar.
    pub fn innovation(&self, z: &Vector, predicted: &Vector) -> Vector {
        let mut nu = z - predicted;
        if self.kind == SensorKind::Radar {
            nu[1] = wrap_angle(nu[1]);
        }
        nu
    }

    /// `h(x)` plus a draw of the measurement noise.
    pub fn measure_noisy<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<Vector> {
        let clean = self.measure(x)?;
        let mut z = draw_gaussian(&clean, &self.noise_root, rng);
        if self.kind == SensorKind::Radar {
            z[1] = wrap_angle(z[1]);
        }
        Ok(z)
    }
}

/// Radar measurement `(ρ, α, ε)` of the position part of `x`.
/// On the z-axis the azimuth follows the `atan2(0, 0) = 0` convention.
pub fn measure(x: &Vector) -> Result<Vector> {
    if x.len() < 3 {
        return Err(Error::DimensionMismatch { expected: STATE_DIM, got: x.len() });
    }
    let (rx, ry, rz) = (x[0], x[1], x[2]);
    let rho = (rx * rx + ry * ry + rz * rz).sqrt();
    if rho == 0.0 {
        return Err(Error::SingularGeometry(rx, ry, rz));
    }
    let horizontal = (rx * rx + ry * ry).sqrt();
    Ok(Vector::from_vec(vec![rho, ry.atan2(rx), rz.atan2(horizontal)]))
}

/// Analytic `∂h/∂x` (3×6); the velocity block is zero.
pub fn measurement_jacobian(x: &Vector) -> Result<Matrix> {
    if x.len() != STATE_DIM {
        return Err(Error::DimensionMismatch { expected: STATE_DIM, got: x.len() });
    }
    let (rx, ry, rz) = (x[0], x[1], x[2]);
    let s2 = rx * rx + ry * ry;
    let rho2 = s2 + rz * rz;
    if s2 == 0.0 || !s2.is_finite() {
        return Err(Error::SingularGeometry(rx, ry, rz));
    }
    let rho = rho2.sqrt();
    let s = s2.sqrt();
    let mut h = Matrix::zeros(MEAS_DIM, STATE_DIM);
    h[(0, 0)] = rx / rho;
    h[(0, 1)] = ry / rho;
    h[(0, 2)] = rz / rho;
    h[(1, 0)] = -ry / s2;
    h[(1, 1)] = rx / s2;
    h[(2, 0)] = -rx * rz / (rho2 * s);
    h[(2, 1)] = -ry * rz / (rho2 * s);
    h[(2, 2)] = s / rho2;
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct BirthModel {
    pub mean: Vector,
    pub cov: Matrix,
    /// Number of birth draws per step.
    pub count: usize,
    /// Weight carried by each draw.
    pub weight_each: f64,
}

impl BirthModel {
    pub fn new(mean: Vector, cov: Matrix, count: usize, weight_each: f64) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
        }
        cholesky(&cov)?;
        if !(weight_each > 0.0) {
            return Err(Error::Domain(format!("birth weight must be positive, got {weight_each}")));
        }
        Ok(Self { mean, cov, count, weight_each })
    }

    pub fn none(dim: usize) -> Self {
        Self {
            mean: Vector::zeros(dim),
            cov: Matrix::identity(dim, dim),
            count: 0,
            weight_each: 1.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.count as f64 * self.weight_each
    }

    pub fn sample_states<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Vector>> {
        if self.count == 0 {
            return Ok(Vec::new());
        }
        let lower = cholesky(&self.cov)?.l();
        Ok((0..self.count).map(|_| draw_gaussian(&self.mean, &lower, rng)).collect())
    }

    pub fn sample_particles<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParticleSet> {
        let states = self.sample_states(rng)?;
        let weights = vec![self.weight_each; states.len()];
        ParticleSet::new(states, weights)
    }

    /// Sampled birth means, each carrying the full birth covariance.
    pub fn sample_components<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GaussianMixture> {
        let comps = self
            .sample_states(rng)?
            .into_iter()
            .map(|m| GaussianComponent::new(self.weight_each, m, self.cov.clone()))
            .collect();
        GaussianMixture::from_components(self.mean.len(), comps)
    }
}

/// One term of the Gaussian spawn kernel: a target at `x` spawns with weight
/// `weight` around `F·x + offset`, covariance `F·P·Fᵀ + cov`.
#[derive(Debug, Clone)]
pub struct SpawnComponent {
    pub weight: f64,
    pub offset: Vector,
    pub cov: Matrix,
}

#[derive(Debug, Clone, Default)]
pub struct SpawnModel {
    pub components: Vec<SpawnComponent>,
}

impl SpawnModel {
    pub fn new(components: Vec<SpawnComponent>) -> Result<Self> {
        if let Some(c) = components.iter().find(|c| c.weight < 0.0) {
            return Err(Error::Domain(format!("negative spawn weight {}", c.weight)));
        }
        Ok(Self { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Axis-aligned box in position space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.max[i] - self.min[i]).product()
    }
}

#[derive(Debug, Clone)]
pub struct ClutterModel {
    pub rate: f64,
    pub region: Region,
    pub density: f64,
    /// Clutter intensity used in the update; `rate · density` unless overridden.
    pub kappa: f64,
}

impl ClutterModel {
    pub fn new(rate: f64, region: Region) -> Result<Self> {
        let volume = region.volume();
        if !(volume > 0.0) {
            return Err(Error::Domain(format!("clutter region has volume {volume}")));
        }
        Self::with_density(rate, region, 1.0 / volume)
    }

    /// Checks `density · volume = 1` to 1e-12 relative.
    pub fn with_density(rate: f64, region: Region, density: f64) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::Domain(format!("clutter rate must be >= 0, got {rate}")));
        }
        let volume = region.volume();
        if ((density * volume) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "clutter density {density} inconsistent with region volume {volume}"
            )));
        }
        Ok(Self { rate, region, density, kappa: rate * density })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn sample_positions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vector> {
        if self.rate <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(self.rate).expect("positive rate").sample(rng) as usize;
        (0..count)
            .map(|_| {
                let mut r = Vector::zeros(STATE_DIM);
                for i in 0..3 {
                    r[i] = rng.random_range(self.region.min[i]..=self.region.max[i]);
                }
                r
            })
            .collect()
    }
}

/// Poisson-count clutter, uniform over the region in position space, mapped through `h`.
pub fn sample_clutter<R: Rng + ?Sized>(
    model: &ClutterModel,
    sensor: &MeasurementModel,
    rng: &mut R,
) -> Vec<Vector> {
    model
        .sample_positions(rng)
        .iter()
        .filter_map(|r| sensor.measure(r).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSurvival {
    pub p_detect: f64,
    pub p_survive: f64,
}

impl DetectionSurvival {
    pub fn new(p_detect: f64, p_survive: f64) -> Result<Self> {
        for (name, p) in [("p_detect", p_detect), ("p_survive", p_survive)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(Self { p_detect, p_survive })
    }
}

/// Everything a PHD recursion needs to know about the world.
#[derive(Debug, Clone)]
pub struct Models {
    pub motion: MotionModel,
    pub sensor: MeasurementModel,
    pub birth: BirthModel,
    pub spawn: SpawnModel,
    pub clutter: ClutterModel,
    pub detection: DetectionSurvival,
}

impl Models {
    pub fn kappa(&self) -> f64 {
        self.clutter.kappa
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn default_region() -> Region {
        Region { min: [0.0, 0.0, 0.0], max: [200.0, 200.0, 400.0] }
    }

    #[test]
    fn cv_propagation_examples() {
        let x = v(&[0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(propagate_state(&x, 1.0).unwrap(), v(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]));
        assert_eq!(propagate_state(&x, 0.0).unwrap(), x);
        let t1 = v(&[50.0, 50.0, 50.0, 0.5, 0.5, 2.0]);
        let at50 = propagate_state(&t1, 50.0).unwrap();
        assert_eq!(at50.rows(0, 3).iter().copied().collect::<Vec<_>>(), vec![75.0, 75.0, 150.0]);
    }

    #[test]
    fn propagation_rejects_bad_input() {
        assert!(matches!(
            propagate_state(&v(&[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]), 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(propagate_state(&v(&[0.0; 4]), 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rk87_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-500.0..500.0));
            let dt = rng.random_range(0.0..3.0);
            let a = propagate_state(&x, dt).unwrap();
            let b = propagate_state_rk87(&x, dt).unwrap();
            assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn transition_matrix_properties() {
        assert_eq!(transition_matrix(0.0), Matrix::identity(6, 6));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let dt = rng.random_range(0.0..2.0);
            let x = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-10.0..10.0));
            assert!((transition_matrix(dt) * &x - propagate_state(&x, dt).unwrap()).amax() < 1e-12);
            let twice = transition_matrix(dt) * transition_matrix(dt);
            assert!((transition_matrix(2.0 * dt) - twice).amax() < 1e-12);
        }
    }

    #[test]
    fn propagation_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-10.0..10.0));
        let y = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-10.0..10.0));
        let (a, b) = (1.7, -0.3);
        let lhs = propagate_state(&(&x * a + &y * b), 1.0).unwrap();
        let rhs = propagate_state(&x, 1.0).unwrap() * a + propagate_state(&y, 1.0).unwrap() * b;
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn white_noise_acceleration_blocks() {
        let q = white_noise_acceleration(0.05, 1.0);
        let var = 0.0025;
        assert!(close(q[(0, 0)], var / 4.0, 1e-15));
        assert!(close(q[(0, 3)], var / 2.0, 1e-15));
        assert!(close(q[(3, 3)], var, 1e-15));
        assert_eq!(q[(0, 1)], 0.0);
        assert!(SymmetricEigen::new(q).eigenvalues.min() > -1e-15);
    }

    #[test]
    fn radar_examples() {
        let z = measure(&v(&[1.0, 0.0, 0.0, 9.0, 9.0, 9.0])).unwrap();
        assert_eq!(z, v(&[1.0, 0.0, 0.0]));
        let z = measure(&v(&[3.0, 4.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(close(z[0], 5.0, 1e-12) && close(z[1], 0.92730, 1e-5) && z[2] == 0.0);
        let z = measure(&v(&[0.0, 0.0, 5.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(z[0], 5.0);
        assert_eq!(z[1], 0.0);
        assert!(close(z[2], std::f64::consts::FRAC_PI_2, 1e-15));
        assert!(matches!(measure(&Vector::zeros(6)), Err(Error::SingularGeometry(..))));
    }

    #[test]
    fn spherical_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let rho: f64 = rng.random_range(0.1..1000.0);
            let az: f64 = rng.random_range(-3.14..3.14);
            let el: f64 = rng.random_range(-1.5..1.5);
            let x = v(&[
                rho * el.cos() * az.cos(),
                rho * el.cos() * az.sin(),
                rho * el.sin(),
                0.0,
                0.0,
                0.0,
            ]);
            let z = measure(&x).unwrap();
            assert!(close(z[0], rho, 1e-10 * rho.max(1.0)));
            assert!(close(z[1], az, 1e-10) && close(z[2], el, 1e-10));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-300.0..300.0));
            if x[0].hypot(x[1]) < 1.0 {
                continue;
            }
            let jac = measurement_jacobian(&x).unwrap();
            for j in 0..STATE_DIM {
                let h = 1e-6 * (1.0 + x[j].abs());
                let (mut hi, mut lo) = (x.clone(), x.clone());
                hi[j] += h;
                lo[j] -= h;
                let mut d = measure(&hi).unwrap() - measure(&lo).unwrap();
                d[1] = wrap_angle(d[1]);
                for i in 0..3 {
                    assert!((d[i] / (2.0 * h) - jac[(i, j)]).abs() < 1e-5, "({i},{j}) at {x}");
                }
            }
            assert!(jac.columns(3, 3).iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn jacobian_on_axis() {
        let jac = measurement_jacobian(&v(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(close(jac[(0, 0)], 1.0, 1e-15));
        assert!(close(jac[(1, 1)], 1.0, 1e-15));
        assert!(close(jac[(2, 2)], 1.0, 1e-15));
        assert!(matches!(
            measurement_jacobian(&v(&[0.0, 0.0, 3.0, 0.0, 0.0, 0.0])),
            Err(Error::SingularGeometry(..))
        ));
    }

    #[test]
    fn azimuth_innovation_wraps() {
        let sensor = MeasurementModel::radar(1.0, 0.01, 0.01).unwrap();
        let pi = std::f64::consts::PI;
        let nu = sensor.innovation(&v(&[10.0, pi - 0.01, 0.0]), &v(&[10.0, -pi + 0.01, 0.0]));
        assert!(close(nu[1], -0.02, 1e-12));
    }

    #[test]
    fn clutter_density_consistency() {
        let c = ClutterModel::with_density(10.0, default_region(), 6.25e-8).unwrap();
        assert!(close(c.kappa, 6.25e-7, 1e-20));
        assert!(ClutterModel::with_density(10.0, default_region(), 6.0e-8).is_err());
        assert!(close(ClutterModel::new(10.0, default_region()).unwrap().density, 6.25e-8, 1e-22));
    }

    #[test]
    fn clutter_count_and_bound() {
        let sensor = MeasurementModel::radar(1.0, 0.01, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let none = ClutterModel::new(0.0, default_region()).unwrap();
        assert!(sample_clutter(&none, &sensor, &mut rng).is_empty());

        let model = ClutterModel::new(10.0, default_region()).unwrap();
        let scans = 10_000;
        let bound = (200.0f64.powi(2) * 2.0 + 400.0f64.powi(2)).sqrt();
        let mut total = 0usize;
        for _ in 0..scans {
            let zs = sample_clutter(&model, &sensor, &mut rng);
            assert!(zs.iter().all(|z| z[0] <= bound));
            total += zs.len();
        }
        let mean = total as f64 / scans as f64;
        assert!((mean - 10.0).abs() < 4.0 * (10.0 / scans as f64).sqrt(), "{mean}");
    }

    fn default_birth() -> BirthModel {
        let std = v(&[50.0, 50.0, 50.0, 5.0, 5.0, 5.0]);
        BirthModel::new(
            v(&[75.0, 75.0, 150.0, 0.0, 0.0, 0.0]),
            Matrix::from_diagonal(&std.map(|s| s * s)),
            10,
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn birth_mass_and_shapes() {
        let birth = default_birth();
        assert!(close(birth.mass(), 0.1, 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let particles = birth.sample_particles(&mut rng).unwrap();
        assert_eq!(particles.len(), 10);
        assert!(close(particles.mass(), 0.1, 1e-15));
        let comps = birth.sample_components(&mut rng).unwrap();
        assert_eq!(comps.len(), 10);
        assert!(comps.iter().all(|c| c.weight == 0.01 && c.cov == birth.cov));
        let none = BirthModel::none(6);
        assert!(none.sample_states(&mut rng).unwrap().is_empty());
        assert_eq!(none.mass(), 0.0);
    }

    #[test]
    fn birth_sample_mean() {
        let birth = default_birth();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut sum = Vector::zeros(6);
        let mut n = 0;
        while n < 10_000 {
            for x in birth.sample_states(&mut rng).unwrap() {
                sum += x;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        for i in 0..6 {
            let se = birth.cov[(i, i)].sqrt() / (n as f64).sqrt();
            assert!((mean[i] - birth.mean[i]).abs() < 4.0 * se, "axis {i}");
        }
    }

    #[test]
    fn process_noise_must_be_psd() {
        let mut q = Matrix::zeros(6, 6);
        q[(0, 0)] = -1.0;
        assert!(MotionModel::new(1.0, q, Integrator::ClosedForm).is_err());
        assert!(MotionModel::new(0.0, Matrix::zeros(6, 6), Integrator::ClosedForm).is_err());
    }

    #[test]
    fn deterministic_motion_consumes_no_randomness() {
        let motion = MotionModel::deterministic(1.0);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let b = a.clone();
        let x = v(&[1.0, 2.0, 3.0, 0.1, 0.2, 0.3]);
        let moved = motion.propagate_noisy(&x, &mut a).unwrap();
        assert!((moved - propagate_state(&x, 1.0).unwrap()).amax() < 1e-12);
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_are_checked() {
        assert!(DetectionSurvival::new(0.98, 0.99).is_ok());
        assert!(DetectionSurvival::new(1.1, 0.99).is_err());
        assert!(DetectionSurvival::new(0.5, -0.1).is_err());
    }
}
