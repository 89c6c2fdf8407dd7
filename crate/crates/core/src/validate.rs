//! Self-checks run by `engm-phd validate`: oracle comparisons and invariants
//! that should hold on any machine.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assignment::assignment_min_cost;
use crate::config::ScenarioConfig;
use crate::engmf::engmf_step;
use crate::filter::FilterKind;
use crate::gaussmix::{silverman_bandwidth, GaussianComponent, GaussianMixture};
use crate::metrics::{ospa, OspaParams};
use crate::models::{
    measure, measurement_jacobian, propagate_state, propagate_state_rk87, white_noise_acceleration,
    BirthModel, ClutterModel, DetectionSurvival, Integrator, MeasurementModel, Models, MotionModel,
    Region, SpawnModel, STATE_DIM,
};
use crate::phd_engm::{engm_predict, engm_resample, engm_update, EngmPhdState};
use crate::phd_gm::{gm_predict, gm_update, prune_merge_cap, GmPhdConfig};
use crate::scenario::{build_filter, generate_scans, run_rng, simulate_truth};
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    /// `Ok` carries a short note, `Err` the reason for failure.
    pub outcome: Result<String, String>,
    pub seconds: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

type CheckFn = fn() -> Result<String, String>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("silverman-bandwidth", silverman_value),
    ("ospa-examples", ospa_examples),
    ("assignment-vs-brute-force", assignment_brute_force),
    ("jacobian-vs-finite-differences", jacobian_finite_differences),
    ("rk87-vs-closed-form", integrator_agreement),
    ("gm-phd-vs-kalman", kalman_oracle),
    ("engm-phd-vs-engmf", engmf_reduction),
    ("mass-ledgers", mass_ledgers),
    ("config-round-trip", config_round_trip),
];

pub fn run_all() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let outcome = f();
            Check { name, outcome, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn silverman_value() -> Result<String, String> {
    let b = silverman_bandwidth(6, 250).map_err(|e| e.to_string())?;
    ensure((b - 0.28854).abs() < 1e-4, || format!("beta(6, 250) = {b}"))?;
    Ok(format!("beta(6, 250) = {b:.6}"))
}

fn pos(x: f64, y: f64, z: f64) -> Vector {
    Vector::from_vec(vec![x, y, z, 0.0, 0.0, 0.0])
}

fn ospa_examples() -> Result<String, String> {
    let p = OspaParams::default();
    let cases = [
        (vec![pos(1.0, 2.0, 3.0)], vec![pos(1.0, 2.0, 3.0)], 0.0),
        (vec![], vec![pos(1.0, 2.0, 3.0)], 100.0),
        (vec![pos(0.0, 0.0, 0.0)], vec![pos(3.0, 4.0, 0.0)], 5.0),
        (vec![pos(0.0, 0.0, 0.0)], vec![pos(0.0, 0.0, 0.0), pos(1e3, 0.0, 0.0)], 100.0 / 2f64.sqrt()),
    ];
    for (x, y, want) in &cases {
        let got = ospa(x, y, &p).total;
        ensure((got - want).abs() < 1e-9, || format!("expected {want}, got {got}"))?;
    }
    Ok("4 examples".into())
}

fn brute_force_min(cost: &Matrix) -> f64 {
    let (m, n) = cost.shape();
    let (small, large, transpose) = if m <= n { (m, n, false) } else { (n, m, true) };
    let at = |i: usize, j: usize| if transpose { cost[(j, i)] } else { cost[(i, j)] };
    let mut best = f64::INFINITY;
    let mut used = vec![false; large];
    fn rec(
        i: usize,
        small: usize,
        acc: f64,
        used: &mut [bool],
        best: &mut f64,
        at: &dyn Fn(usize, usize) -> f64,
    ) {
        if i == small {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                rec(i + 1, small, acc + at(i, j), used, best, at);
                used[j] = false;
            }
        }
    }
    rec(0, small, 0.0, &mut used, &mut best, &at);
    best
}

fn assignment_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut n_checked = 0;
    for size in 2..=6 {
        for _ in 0..20 {
            let cols = size + rng.random_range(0..2);
            let cost = Matrix::from_fn(size, cols, |_, _| rng.random_range(0.0..10.0));
            let got = assignment_min_cost(&cost).cost;
            let want = brute_force_min(&cost);
            ensure((got - want).abs() < 1e-9, || format!("{size}x{cols}: {got} vs {want}"))?;
            n_checked += 1;
        }
    }
    Ok(format!("{n_checked} matrices"))
}

fn jacobian_finite_differences() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = Vector::from_fn(STATE_DIM, |i, _| {
            if i < 3 {
                rng.random_range(10.0..200.0)
            } else {
                rng.random_range(-5.0..5.0)
            }
        });
        let jac = measurement_jacobian(&x).map_err(|e| e.to_string())?;
        for j in 0..STATE_DIM {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += h;
            lo[j] -= h;
            let d = (measure(&hi).map_err(|e| e.to_string())? - measure(&lo).map_err(|e| e.to_string())?) / (2.0 * h);
            for i in 0..3 {
                worst = worst.max((d[i] - jac[(i, j)]).abs());
            }
        }
    }
    ensure(worst < 1e-5, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn integrator_agreement() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = Vector::from_fn(STATE_DIM, |_, _| rng.random_range(-100.0..100.0));
        let a = propagate_state(&x, 1.0).map_err(|e| e.to_string())?;
        let b = propagate_state_rk87(&x, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).amax());
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn quiet_models(sensor: MeasurementModel, motion: MotionModel) -> Result<Models, String> {
    let region = Region { min: [0.0; 3], max: [1.0; 3] };
    Ok(Models {
        motion,
        sensor,
        birth: BirthModel::none(STATE_DIM),
        spawn: SpawnModel::new(Vec::new()).map_err(|e| e.to_string())?,
        clutter: ClutterModel::new(0.0, region).map_err(|e| e.to_string())?.with_kappa(0.0),
        detection: DetectionSurvival::new(1.0, 1.0).map_err(|e| e.to_string())?,
    })
}

fn kalman_oracle() -> Result<String, String> {
    let dt = 1.0;
    let q = white_noise_acceleration(0.1, dt);
    let motion = MotionModel::new(dt, q.clone(), Integrator::ClosedForm).map_err(|e| e.to_string())?;
    let sensor = MeasurementModel::position(2.0).map_err(|e| e.to_string())?;
    let models = quiet_models(sensor.clone(), motion.clone())?;
    let config = GmPhdConfig::default();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut truth = Vector::from_vec(vec![10.0, -5.0, 30.0, 1.0, 0.5, -0.2]);
    let mut m = Vector::from_vec(vec![12.0, -4.0, 29.0, 0.0, 0.0, 0.0]);
    let mut p = Matrix::from_diagonal(&Vector::from_vec(vec![25.0, 25.0, 25.0, 4.0, 4.0, 4.0]));
    let mut mixture = GaussianMixture::new(STATE_DIM);
    mixture.push(GaussianComponent::new(1.0, m.clone(), p.clone())).map_err(|e| e.to_string())?;

    let f = motion.transition_matrix();
    let h = Matrix::identity(3, STATE_DIM);
    let r = sensor.noise_cov().clone();
    let mut worst: f64 = 0.0;
    for step in 0..50 {
        truth = propagate_state(&truth, dt).map_err(|e| e.to_string())?;
        let z = Vector::from_fn(3, |i, _| truth[i] + 2.0 * rng.sample::<f64, _>(StandardNormal));

        m = &f * &m;
        p = &f * &p * f.transpose() + &q;
        let s = &h * &p * h.transpose() + &r;
        let k = &p * h.transpose() * s.try_inverse().ok_or("singular innovation covariance")?;
        m = &m + &k * (&z - &h * &m);
        p = (Matrix::identity(STATE_DIM, STATE_DIM) - &k * &h) * &p;

        let predicted = gm_predict(&mixture, &models, &mut rng).map_err(|e| e.to_string())?;
        let updated = gm_update(&predicted, std::slice::from_ref(&z), &models).map_err(|e| e.to_string())?;
        mixture = prune_merge_cap(&updated, &config);
        ensure(mixture.len() == 1, || format!("step {step}: {} components", mixture.len()))?;
        let c = &mixture.components()[0];
        worst = worst.max((&c.mean - &m).amax()).max((&c.cov - &p).amax());
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 steps, max deviation {worst:.1e}"))
}

fn engmf_reduction() -> Result<String, String> {
    let dt = 1.0;
    let motion =
        MotionModel::new(dt, white_noise_acceleration(0.05, dt), Integrator::ClosedForm).map_err(|e| e.to_string())?;
    let sensor = MeasurementModel::position(1.0).map_err(|e| e.to_string())?;
    let models = quiet_models(sensor.clone(), motion.clone())?;
    let j = 100;

    let mut scene = ChaCha8Rng::seed_from_u64(6);
    let mut truth = Vector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.5]);
    let initial: Vec<Vector> = (0..j)
        .map(|_| Vector::from_fn(STATE_DIM, |i, _| truth[i] + scene.sample::<f64, _>(StandardNormal)))
        .collect();

    let mut rng_a = ChaCha8Rng::seed_from_u64(60);
    let mut rng_b = rng_a.clone();
    let mut reference = initial.clone();
    let mut state = EngmPhdState::new(initial, 1.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        truth = propagate_state(&truth, dt).map_err(|e| e.to_string())?;
        let z = Vector::from_fn(3, |i, _| truth[i] + scene.sample::<f64, _>(StandardNormal));
        let r = engmf_step(&reference, &z, &motion, &sensor, &mut rng_a).map_err(|e| e.to_string())?;
        let prior = engm_predict(&state, &models, &mut rng_b).map_err(|e| e.to_string())?;
        let posterior = engm_update(&prior, std::slice::from_ref(&z), &models).map_err(|e| e.to_string())?;
        state = engm_resample(&posterior, j, &mut rng_b).map_err(|e| e.to_string())?;
        for (a, b) in r.particles.iter().zip(state.particles().states()) {
            worst = worst.max((a - b).amax());
        }
        reference = r.particles;
    }
    ensure(worst < 1e-9, || format!("max particle deviation {worst:e}"))?;
    Ok(format!("20 steps, max particle deviation {worst:.1e}"))
}

fn mass_ledgers() -> Result<String, String> {
    let mut config = ScenarioConfig::default();
    config.scenario.t_end = 30.0;
    let models = config.build_models().map_err(|e| e.to_string())?;
    let truth = simulate_truth(&config).map_err(|e| e.to_string())?;
    let scans = generate_scans(&config, &models, &truth, 9, 0).map_err(|e| e.to_string())?;
    let p_s = models.detection.p_survive;
    let birth = models.birth.mass();
    let mut worst: f64 = 0.0;
    for kind in FilterKind::ALL {
        let mut rng = run_rng(9, 0, 1);
        let mut filter = build_filter(&config, kind, &mut rng).map_err(|e| e.to_string())?;
        for scan in &scans {
            let before = filter.mass();
            let out = filter.step(&scan.measurements, &mut rng).map_err(|e| e.to_string())?;
            worst = worst.max((out.predicted_mass - (p_s * before + birth)).abs());
        }
    }
    ensure(worst < 1e-12, || format!("max ledger error {worst:e}"))?;
    Ok(format!("max ledger error {worst:.1e}"))
}

fn config_round_trip() -> Result<String, String> {
    let text = ScenarioConfig::default().to_toml();
    let again = ScenarioConfig::parse(&text).map_err(|e| e.to_string())?.to_toml();
    ensure(text == again, || "re-emitted text differs".into())?;
    let empty = ScenarioConfig::parse("").map_err(|e| e.to_string())?;
    ensure(empty == ScenarioConfig::default(), || "empty file is not the default".into())?;
    Ok("byte-identical".into())
}
