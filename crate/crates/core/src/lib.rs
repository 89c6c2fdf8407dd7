//! Probability hypothesis density (PHD) filters for multi-target tracking.
//!
//! Three interchangeable representations of the intensity function are provided:
//!
//! * [`phd_gm`]: Gaussian-mixture PHD with an extended Kalman update and
//!   prune/merge/cap mixture management.
//! * [`phd_smc`]: sequential Monte Carlo PHD with a bootstrap proposal,
//!   multinomial resampling and k-means state extraction.
//! * [`phd_engm`]: ensemble Gaussian-mixture PHD, which turns resampled
//!   particles into a uniform-weight Gaussian mixture by kernel density
//!   estimation and updates it with the Gaussian-mixture equations.
//!
//! The [`scenario`] module simulates a two-target radar crossing experiment and
//! drives any of the filters through Monte Carlo runs scored with [`metrics::ospa`].

pub mod assignment;
pub mod config;
pub mod engmf;
pub mod error;
pub mod filter;
#[cfg(test)]
mod fixtures;
pub mod gaussmix;
pub mod integrator;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod output;
pub mod phd_engm;
pub mod phd_gm;
pub mod phd_smc;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
pub use filter::{FilterKind, PhdFilter, StepOutput};
pub use gaussmix::{GaussianComponent, GaussianMixture};
pub use phd_smc::ParticleSet;

/// State vectors and matrices are dynamically sized; the tracking models use `n_x = 6`.
pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
