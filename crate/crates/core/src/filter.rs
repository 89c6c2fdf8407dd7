//! Common driver interface over the three PHD recursions.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::Result;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Gm,
    Smc,
    Engm,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Gm, FilterKind::Smc, FilterKind::Engm];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Gm => "gm",
            FilterKind::Smc => "smc",
            FilterKind::Engm => "engm",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gm" => Ok(FilterKind::Gm),
            "smc" => Ok(FilterKind::Smc),
            "engm" => Ok(FilterKind::Engm),
            other => Err(format!("unknown filter `{other}` (expected gm, smc or engm)")),
        }
    }
}

/// What one predict/update/manage/extract cycle produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Mass of the predicted intensity.
    pub predicted_mass: f64,
    /// Mass of the updated intensity before pruning or resampling.
    pub updated_mass: f64,
    /// Mass carried forward to the next step.
    pub posterior_mass: f64,
    pub n_hat: usize,
    pub states: Vec<Vector>,
    /// Components or particles carried forward.
    pub n_components: usize,
}

pub trait PhdFilter: Send {
    fn kind(&self) -> FilterKind;

    /// Runs one full recursion on a scan of measurements.
    fn step(&mut self, scan: &[Vector], rng: &mut dyn RngCore) -> Result<StepOutput>;

    /// Current posterior mass (expected cardinality).
    fn mass(&self) -> f64;
}

/// `round(x)` with halves rounded up; negative input yields 0.
pub fn round_half_up(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    (x + 0.5).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(1.8), 2);
        assert_eq!(round_half_up(0.2), 0);
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(-0.7), 0);
        assert_eq!(round_half_up(f64::NAN), 0);
    }

    #[test]
    fn names_parse_back() {
        for kind in FilterKind::ALL {
            assert_eq!(kind.name().parse::<FilterKind>().unwrap(), kind);
        }
        assert!("ukf".parse::<FilterKind>().is_err());
    }
}
