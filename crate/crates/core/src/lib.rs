//! Depth-resolved coral reef temperature reconstruction.
//!
//! A surface SST series and sparse subsurface logger records are fused by a
//! physics-informed network constrained by the 1D vertical heat equation
//! with depth-attenuated solar heating. The crate also carries the
//! comparison baselines, degree-heating-day stress profiles, and the
//! experiment harness used to evaluate all of them.

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod model;
pub mod physics;
pub mod rng;
pub mod stress;
pub mod time;
pub mod training;

pub use error::{Error, Result};

/// Anything that maps a (depth, time) pair to a temperature in °C.
///
/// The PINN and every baseline implement this so the harness can treat them
/// uniformly.
pub trait DepthPredictor {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64>;

    fn predict_many(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        points.iter().map(|&(z, t)| self.predict_at(z, t)).collect()
    }
}
