//! Model sets shared by unit tests.

use crate::config::ScenarioConfig;
use crate::models::{
    BirthModel, ClutterModel, DetectionSurvival, MeasurementModel, Models, MotionModel, Region, SpawnModel,
    STATE_DIM,
};

pub fn default_models() -> Models {
    ScenarioConfig::default().build_models().unwrap()
}

/// One-target world: no births, no spawning, no clutter, certain detection and survival.
pub fn quiet_models(sensor: MeasurementModel, motion: MotionModel) -> Models {
    let region = Region { min: [0.0; 3], max: [1.0; 3] };
    Models {
        motion,
        sensor,
        birth: BirthModel::none(STATE_DIM),
        spawn: SpawnModel::default(),
        clutter: ClutterModel::new(0.0, region).unwrap().with_kappa(0.0),
        detection: DetectionSurvival::new(1.0, 1.0).unwrap(),
    }
}
