//! Ground truth, measurement generation and Monte Carlo drivers.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ConfigError, ScenarioConfig};
use crate::error::{Error, Result};
use crate::filter::{FilterKind, PhdFilter};
use crate::gaussmix::GaussianMixture;
use crate::metrics::{ospa, Ospa};
use crate::models::{propagate_state, sample_clutter, Models};
use crate::phd_engm::{EngmPhdFilter, EngmPhdState};
use crate::phd_gm::GmPhdFilter;
use crate::phd_smc::{ParticleSet, SmcPhdFilter};
use crate::Vector;

const SCAN_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;

/// Generator for run `run` of a batch started at `seed`. Run `r` uses seed
/// `seed + r`, so any run can be repeated alone as run 0 of a new batch.
pub fn run_rng(seed: u64, run: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
    rng.set_stream(stream);
    rng
}

/// True states at every scan time `t_start + k·dt`, `k = 0..=steps`.
/// Targets are constant velocity and persist for the whole scenario.
pub fn simulate_truth(config: &ScenarioConfig) -> Result<Vec<Vec<Vector>>> {
    let initial = config.initial_states();
    (0..=config.steps())
        .map(|k| {
            let t = k as f64 * config.scenario.dt;
            initial.iter().map(|x| propagate_state(x, t)).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScan {
    pub k: usize,
    pub measurements: Vec<Vector>,
    /// How many of the measurements came from targets.
    pub n_detections: usize,
}

/// One scan: each target is detected with `p_D`, clutter is added, and the
/// order is shuffled so no position in the scan identifies a target.
pub fn generate_scan<R: Rng + ?Sized>(
    k: usize,
    truth: &[Vector],
    models: &Models,
    rng: &mut R,
) -> Result<MeasurementScan> {
    let mut measurements = Vec::new();
    for x in truth {
        if rng.random::<f64>() < models.detection.p_detect {
            measurements.push(models.sensor.measure_noisy(x, rng)?);
        }
    }
    let n_detections = measurements.len();
    measurements.extend(sample_clutter(&models.clutter, &models.sensor, rng));
    measurements.shuffle(rng);
    Ok(MeasurementScan { k, measurements, n_detections })
}

/// All scans of one run, drawn from the run's scan stream.
pub fn generate_scans(
    config: &ScenarioConfig,
    models: &Models,
    truth: &[Vec<Vector>],
    seed: u64,
    run: usize,
) -> Result<Vec<MeasurementScan>> {
    let mut rng = run_rng(seed, run, SCAN_STREAM);
    (1..=config.steps())
        .map(|k| generate_scan(k, &truth[k], models, &mut rng))
        .collect()
}

/// Builds a filter in its initial state.
pub fn build_filter<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    kind: FilterKind,
    rng: &mut R,
) -> std::result::Result<Box<dyn PhdFilter>, ConfigError> {
    let models = config.build_models()?;
    let initial = config.initial_component()?;
    let numeric = |e: Error| ConfigError::Invalid { field: "initial".into(), message: e.to_string() };
    Ok(match kind {
        FilterKind::Gm => {
            let mut mixture = GaussianMixture::new(initial.dim());
            mixture.push(initial).map_err(numeric)?;
            Box::new(GmPhdFilter::new(config.gm_config(), models, mixture))
        }
        FilterKind::Smc => {
            let n = config.scenario.particle_count;
            let particles = ParticleSet::from_gaussian(&initial, n, rng).map_err(numeric)?;
            Box::new(SmcPhdFilter::new(config.smc_config(), models, particles))
        }
        FilterKind::Engm => {
            let n = config.scenario.particle_count;
            let (states, _) = ParticleSet::from_gaussian(&initial, n, rng).map_err(numeric)?.into_parts();
            let state = EngmPhdState::new(states, initial.weight).map_err(numeric)?;
            Box::new(EngmPhdFilter::new(config.engm_config(), models, state))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub n_true: usize,
    pub n_hat: usize,
    pub estimates: Vec<Vector>,
    pub ospa: Ospa,
    pub n_components: usize,
    pub predicted_mass: f64,
    pub posterior_mass: f64,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub filter: FilterKind,
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn wall(&self) -> Duration {
        self.steps.iter().map(|s| s.wall).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(ConfigError),
    Numerical(Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numerical(e)
    }
}

/// Runs one filter over one Monte Carlo run. The scans depend only on
/// `(seed, run)`, so every filter sees the same measurements.
pub fn run_filter(
    config: &ScenarioConfig,
    kind: FilterKind,
    seed: u64,
    run: usize,
) -> std::result::Result<RunRecord, RunError> {
    let models = config.build_models()?;
    let truth = simulate_truth(config)?;
    let scans = generate_scans(config, &models, &truth, seed, run)?;
    let mut rng = run_rng(seed, run, FILTER_STREAM);
    let mut filter = build_filter(config, kind, &mut rng)?;
    let params = config.ospa_params();
    let mut steps = Vec::with_capacity(scans.len());
    for scan in &scans {
        let start = Instant::now();
        let out = filter
            .step(&scan.measurements, &mut rng)
            .map_err(|e| Error::AtStep { step: scan.k, source: Box::new(e) })?;
        let wall = start.elapsed();
        let truth_k = &truth[scan.k];
        steps.push(StepRecord {
            k: scan.k,
            n_true: truth_k.len(),
            n_hat: out.n_hat,
            ospa: ospa(&out.states, truth_k, &params),
            estimates: out.states,
            n_components: out.n_components,
            predicted_mass: out.predicted_mass,
            posterior_mass: out.posterior_mass,
            wall,
        });
    }
    Ok(RunRecord { run, filter: kind, steps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run: usize,
    pub error: RunError,
}

/// Per-step means over the successful runs of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub k: usize,
    pub n_true: usize,
    pub mean_n_hat: f64,
    pub mean_ospa: f64,
    pub mean_ospa_loc: f64,
    pub mean_ospa_card: f64,
    pub mean_components: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub filter: FilterKind,
    pub n_runs: usize,
    pub n_failed: usize,
    pub steps: Vec<StepSummary>,
    /// Mean components (or particles) per step over all runs and steps.
    pub mean_components: f64,
    pub total_wall: Duration,
}

impl Summary {
    pub fn mean_run_seconds(&self) -> f64 {
        if self.n_runs == 0 {
            0.0
        } else {
            self.total_wall.as_secs_f64() / self.n_runs as f64
        }
    }

    /// Mean OSPA over the steps with `k` in `range`.
    pub fn mean_ospa_over(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        let sel: Vec<f64> = self.steps.iter().filter(|s| range.contains(&s.k)).map(|s| s.mean_ospa).collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }

    /// Mean estimated cardinality over the steps with `k` in `range`.
    pub fn mean_n_hat_over(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        let sel: Vec<f64> = self.steps.iter().filter(|s| range.contains(&s.k)).map(|s| s.mean_n_hat).collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }
}

pub fn summarize(filter: FilterKind, runs: &[RunRecord], n_failed: usize) -> Summary {
    let n = runs.len();
    let n_steps = runs.first().map_or(0, |r| r.steps.len());
    let nf = n.max(1) as f64;
    let steps = (0..n_steps)
        .map(|i| {
            let at = |f: &dyn Fn(&StepRecord) -> f64| runs.iter().map(|r| f(&r.steps[i])).sum::<f64>() / nf;
            let first = &runs[0].steps[i];
            StepSummary {
                k: first.k,
                n_true: first.n_true,
                mean_n_hat: at(&|s| s.n_hat as f64),
                mean_ospa: at(&|s| s.ospa.total),
                mean_ospa_loc: at(&|s| s.ospa.localization),
                mean_ospa_card: at(&|s| s.ospa.cardinality),
                mean_components: at(&|s| s.n_components as f64),
            }
        })
        .collect::<Vec<_>>();
    let total_steps = (n * n_steps).max(1) as f64;
    let mean_components = runs
        .iter()
        .flat_map(|r| r.steps.iter())
        .map(|s| s.n_components as f64)
        .sum::<f64>()
        / total_steps;
    Summary {
        filter,
        n_runs: n,
        n_failed,
        steps,
        mean_components,
        total_wall: runs.iter().map(RunRecord::wall).sum(),
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub filter: FilterKind,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub summary: Summary,
}

/// Runs `n_runs` independent runs in parallel. Results are collected in run
/// order, so output does not depend on the thread count. Failed runs are
/// recorded and left out of the summary.
pub fn run_monte_carlo(config: &ScenarioConfig, kind: FilterKind, seed: u64, n_runs: usize) -> MonteCarlo {
    let results: Vec<_> = (0..n_runs)
        .into_par_iter()
        .map(|run| (run, run_filter(config, kind, seed, run)))
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (run, r) in results {
        match r {
            Ok(rec) => runs.push(rec),
            Err(error) => failures.push(RunFailure { run, error }),
        }
    }
    let summary = summarize(kind, &runs, failures.len());
    MonteCarlo { filter: kind, runs, failures, summary }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_follows_constant_velocity() {
        let cfg = ScenarioConfig::default();
        let truth = simulate_truth(&cfg).unwrap();
        assert_eq!(truth.len(), 101);
        let t1 = &truth[50][0];
        assert!((t1[0] - 75.0).abs() < 1e-12 && (t1[1] - 75.0).abs() < 1e-12 && (t1[2] - 150.0).abs() < 1e-12);
        let t2 = &truth[100][1];
        assert!((t2[0] - 50.0).abs() < 1e-12 && (t2[2] - 250.0).abs() < 1e-12);
    }

    #[test]
    fn scans_are_shared_across_filters_and_reproducible() {
        let cfg = ScenarioConfig::default();
        let models = cfg.build_models().unwrap();
        let truth = simulate_truth(&cfg).unwrap();
        let a = generate_scans(&cfg, &models, &truth, 7, 3).unwrap();
        let b = generate_scans(&cfg, &models, &truth, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_scans(&cfg, &models, &truth, 7, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scan_statistics_match_model() {
        let cfg = ScenarioConfig::default();
        let models = cfg.build_models().unwrap();
        let truth = simulate_truth(&cfg).unwrap();
        let mut dets = 0usize;
        let mut total = 0usize;
        let runs = 40;
        for run in 0..runs {
            for s in generate_scans(&cfg, &models, &truth, 1, run).unwrap() {
                dets += s.n_detections;
                total += s.measurements.len();
            }
        }
        let n = (runs * 100) as f64;
        let p_det = dets as f64 / (2.0 * n);
        let clutter = (total - dets) as f64 / n;
        // binomial sd of p_det ~ 0.0016, Poisson sd of the clutter mean ~ 0.05
        assert!((p_det - 0.98).abs() < 0.008, "{p_det}");
        assert!((clutter - 10.0).abs() < 0.25, "{clutter}");
    }

    #[test]
    fn monte_carlo_is_independent_of_thread_count() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.t_end = 10.0;
        cfg.scenario.particle_count = 50;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        for kind in FilterKind::ALL {
            let a = one.install(|| run_monte_carlo(&cfg, kind, 5, 4));
            let b = four.install(|| run_monte_carlo(&cfg, kind, 5, 4));
            let strip = |m: &MonteCarlo| {
                m.runs
                    .iter()
                    .flat_map(|r| r.steps.iter().map(|s| (s.n_hat, s.ospa, s.estimates.clone())))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
        }
    }
}
