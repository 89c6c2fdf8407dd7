//! Scenario configuration file. Every field has a default, so an empty file
//! describes the two-target radar crossing experiment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussmix::GaussianComponent;
use crate::kmeans::KMeansParams;
use crate::metrics::OspaParams;
use crate::models::{
    white_noise_acceleration, BirthModel, ClutterModel, DetectionSurvival, Integrator,
    MeasurementModel, Models, MotionModel, Region, SpawnComponent, SpawnModel,
    STATE_DIM,
};
use crate::phd_engm::EngmPhdConfig;
use crate::phd_gm::{ExtractionMode, GmPhdConfig};
use crate::phd_smc::{ResamplingScheme, SmcPhdConfig};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub initial: InitialSection,
    pub motion: MotionSection,
    pub measurement: MeasurementSection,
    pub birth: BirthSection,
    pub spawn: SpawnSection,
    pub clutter: ClutterSection,
    pub detection: DetectionSection,
    pub gm: GmSection,
    pub smc: SmcSection,
    pub extraction: ExtractionSection,
    pub ospa: OspaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Initial true states, `[rx, ry, rz, vx, vy, vz]`.
    pub targets: Vec<Vec<f64>>,
    /// Particle count for the SMC and ensemble filters.
    pub particle_count: usize,
    pub seed: u64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 100.0,
            dt: 1.0,
            targets: vec![
                vec![50.0, 50.0, 50.0, 0.5, 0.5, 2.0],
                vec![100.0, 100.0, 50.0, -0.5, -0.5, 2.0],
            ],
            particle_count: 250,
            seed: 1,
        }
    }
}

/// Initial intensity: one low-weight Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { weight: 1e-16, mean: vec![0.0; STATE_DIM], cov_diag: vec![1.0; STATE_DIM] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorChoice {
    Rk87,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub integrator: IntegratorChoice,
    /// Per-axis white-noise acceleration deviation; 0 disables process noise.
    pub process_noise_sigma: f64,
}

impl Default for MotionSection {
    fn default() -> Self {
        Self { integrator: IntegratorChoice::Rk87, process_noise_sigma: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorChoice {
    Radar,
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSection {
    pub sensor: SensorChoice,
    pub sigma_range: f64,
    pub sigma_azimuth_deg: f64,
    pub sigma_elevation_deg: f64,
    /// Only used by the position sensor.
    pub sigma_position: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            sensor: SensorChoice::Radar,
            sigma_range: 1.0,
            sigma_azimuth_deg: 0.5,
            sigma_elevation_deg: 0.5,
            sigma_position: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthSection {
    pub mean: Vec<f64>,
    /// Standard deviations of the diagonal birth covariance.
    pub std: Vec<f64>,
    pub count: usize,
    pub weight: f64,
}

impl Default for BirthSection {
    fn default() -> Self {
        Self {
            mean: vec![75.0, 75.0, 150.0, 0.0, 0.0, 0.0],
            std: vec![50.0, 50.0, 50.0, 5.0, 5.0, 5.0],
            count: 10,
            weight: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnTerm {
    pub weight: f64,
    pub offset: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnSection {
    pub components: Vec<SpawnTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClutterSection {
    pub rate: f64,
    pub region_min: Vec<f64>,
    pub region_max: Vec<f64>,
    pub density: f64,
    /// Overrides `rate · density` as the clutter intensity in the update.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl Default for ClutterSection {
    fn default() -> Self {
        Self {
            rate: 10.0,
            region_min: vec![0.0, 0.0, 0.0],
            region_max: vec![200.0, 200.0, 400.0],
            density: 6.25e-8,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub p_detect: f64,
    pub p_survive: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self { p_detect: 0.98, p_survive: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionChoice {
    TopN,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmSection {
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
    pub extraction: ExtractionChoice,
    pub extraction_threshold: f64,
}

impl Default for GmSection {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-5,
            merge_threshold: 4.0,
            max_components: 250,
            extraction: ExtractionChoice::TopN,
            extraction_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResamplingChoice {
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcSection {
    pub resampling: ResamplingChoice,
}

impl Default for SmcSection {
    fn default() -> Self {
        Self { resampling: ResamplingChoice::Multinomial }
    }
}

/// k-means settings shared by the particle-based filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub kmeans_max_iterations: usize,
    pub kmeans_restarts: usize,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        Self { kmeans_max_iterations: 20, kmeans_restarts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OspaSection {
    pub order: f64,
    pub cutoff: f64,
}

impl Default for OspaSection {
    fn default() -> Self {
        Self { order: 2.0, cutoff: 100.0 }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSection::default(),
            initial: InitialSection::default(),
            motion: MotionSection::default(),
            measurement: MeasurementSection::default(),
            birth: BirthSection::default(),
            spawn: SpawnSection::default(),
            clutter: ClutterSection::default(),
            detection: DetectionSection::default(),
            gm: GmSection::default(),
            smc: SmcSection::default(),
            extraction: ExtractionSection::default(),
            ospa: OspaSection::default(),
        }
    }
}

fn state_vector(field: &str, values: &[f64]) -> Result<Vector, ConfigError> {
    if values.len() != STATE_DIM {
        return Err(invalid(field, format!("expected {STATE_DIM} entries, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(values))
}

fn diag_from_std(field: &str, std: &[f64]) -> Result<Matrix, ConfigError> {
    let v = state_vector(field, std)?;
    if v.iter().any(|s| *s < 0.0) {
        return Err(invalid(field, "standard deviations must be >= 0"));
    }
    Ok(Matrix::from_diagonal(&v.map(|s| s * s)))
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Number of filter steps after the initial time.
    pub fn steps(&self) -> usize {
        ((self.scenario.t_end - self.scenario.t_start) / self.scenario.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        positive("scenario.dt", s.dt)?;
        if !(s.t_end > s.t_start) {
            return Err(invalid("scenario.t_end", "must exceed scenario.t_start"));
        }
        if s.particle_count < 1 {
            return Err(invalid("scenario.particle_count", "must be >= 1"));
        }
        for t in &s.targets {
            state_vector("scenario.targets", t)?;
        }
        self.initial_component()?;
        self.build_models()?;
        self.gm_config().validate().map_err(|e| invalid("gm", e.to_string()))?;
        if self.ospa.order < 1.0 {
            return Err(invalid("ospa.order", "must be >= 1"));
        }
        positive("ospa.cutoff", self.ospa.cutoff)?;
        Ok(())
    }

    pub fn initial_states(&self) -> Vec<Vector> {
        self.scenario
            .targets
            .iter()
            .map(|t| Vector::from_column_slice(t))
            .collect()
    }

    pub fn initial_component(&self) -> Result<GaussianComponent, ConfigError> {
        let i = &self.initial;
        if !(i.weight >= 0.0) {
            return Err(invalid("initial.weight", "must be >= 0"));
        }
        let mean = state_vector("initial.mean", &i.mean)?;
        let var = state_vector("initial.cov_diag", &i.cov_diag)?;
        if var.iter().any(|v| *v <= 0.0) {
            return Err(invalid("initial.cov_diag", "variances must be positive"));
        }
        Ok(GaussianComponent::new(i.weight, mean, Matrix::from_diagonal(&var)))
    }

    pub fn build_models(&self) -> Result<Models, ConfigError> {
        let dt = self.scenario.dt;
        let m = &self.motion;
        if !(m.process_noise_sigma >= 0.0) {
            return Err(invalid("motion.process_noise_sigma", "must be >= 0"));
        }
        let integrator = match m.integrator {
            IntegratorChoice::Rk87 => Integrator::RungeKutta87,
            IntegratorChoice::ClosedForm => Integrator::ClosedForm,
        };
        let motion = MotionModel::new(dt, white_noise_acceleration(m.process_noise_sigma, dt), integrator)
            .map_err(|e| invalid("motion", e.to_string()))?;

        let ms = &self.measurement;
        let sensor = match ms.sensor {
            SensorChoice::Radar => {
                positive("measurement.sigma_range", ms.sigma_range)?;
                positive("measurement.sigma_azimuth_deg", ms.sigma_azimuth_deg)?;
                positive("measurement.sigma_elevation_deg", ms.sigma_elevation_deg)?;
                MeasurementModel::radar(
                    ms.sigma_range,
                    ms.sigma_azimuth_deg.to_radians(),
                    ms.sigma_elevation_deg.to_radians(),
                )
            }
            SensorChoice::Position => {
                positive("measurement.sigma_position", ms.sigma_position)?;
                MeasurementModel::position(ms.sigma_position)
            }
        }
        .map_err(|e| invalid("measurement", e.to_string()))?;

        let b = &self.birth;
        let birth = BirthModel::new(
            state_vector("birth.mean", &b.mean)?,
            diag_from_std("birth.std", &b.std)?,
            b.count,
            b.weight,
        )
        .map_err(|e| invalid("birth", e.to_string()))?;

        let spawn = self
            .spawn
            .components
            .iter()
            .map(|t| {
                Ok(SpawnComponent {
                    weight: t.weight,
                    offset: state_vector("spawn.components.offset", &t.offset)?,
                    cov: diag_from_std("spawn.components.std", &t.std)?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let spawn = SpawnModel::new(spawn).map_err(|e| invalid("spawn", e.to_string()))?;

        let c = &self.clutter;
        let bound = |field: &str, v: &[f64]| -> Result<[f64; 3], ConfigError> {
            <[f64; 3]>::try_from(v).map_err(|_| invalid(field, "expected 3 entries"))
        };
        let region = Region {
            min: bound("clutter.region_min", &c.region_min)?,
            max: bound("clutter.region_max", &c.region_max)?,
        };
        let mut clutter = ClutterModel::with_density(c.rate, region, c.density)
            .map_err(|e| invalid("clutter.density", e.to_string()))?;
        if let Some(k) = c.kappa {
            if !(k >= 0.0) {
                return Err(invalid("clutter.kappa", "must be >= 0"));
            }
            clutter = clutter.with_kappa(k);
        }

        let detection = DetectionSurvival::new(self.detection.p_detect, self.detection.p_survive)
            .map_err(|e| invalid("detection", e.to_string()))?;

        Ok(Models { motion, sensor, birth, spawn, clutter, detection })
    }

    pub fn gm_config(&self) -> GmPhdConfig {
        let g = &self.gm;
        GmPhdConfig {
            prune_threshold: g.prune_threshold,
            merge_threshold: g.merge_threshold,
            max_components: g.max_components,
            extraction: match g.extraction {
                ExtractionChoice::TopN => ExtractionMode::TopN,
                ExtractionChoice::Threshold => ExtractionMode::WeightThreshold(g.extraction_threshold),
            },
        }
    }

    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            max_iterations: self.extraction.kmeans_max_iterations,
            restarts: self.extraction.kmeans_restarts,
        }
    }

    pub fn smc_config(&self) -> SmcPhdConfig {
        SmcPhdConfig {
            particle_count: self.scenario.particle_count,
            resampling: match self.smc.resampling {
                ResamplingChoice::Multinomial => ResamplingScheme::Multinomial,
                ResamplingChoice::Systematic => ResamplingScheme::Systematic,
            },
            kmeans: self.kmeans_params(),
        }
    }

    pub fn engm_config(&self) -> EngmPhdConfig {
        EngmPhdConfig { particle_count: self.scenario.particle_count, kmeans: self.kmeans_params() }
    }

    pub fn ospa_params(&self) -> OspaParams {
        OspaParams { order: self.ospa.order, cutoff: self.ospa.cutoff }
    }
}
