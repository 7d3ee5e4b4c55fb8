//! Comparison methods sharing the [`DepthPredictor`](crate::DepthPredictor)
//! contract: implicit finite differences, inverse-distance weighting, nearest
//! neighbour, Gaussian process, random forest and raw satellite SST.

pub mod fd;
pub mod gp;
pub mod interp;
mod kdtree;
pub mod rf;

use serde::{Deserialize, Serialize};

use crate::dataset::{ReefDataset, SstSeries};
use crate::{DepthPredictor, Result};

pub use fd::{fd_solve, solve_column, ColumnProblem, FdBaseline, FdGrid, FD_DT, FD_NZ, FD_SPINUP};
pub use gp::{GpHyper, GpModel};
pub use interp::{IdwModel, NnModel};
pub use rf::{RfConfig, RfModel};

/// Maps `(z, t)` to the unit square of the training domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub z_max: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Normalizer {
    pub fn for_dataset(ds: &ReefDataset) -> Self {
        Self { z_max: ds.z_max, t_start: ds.window.start as f64, t_end: ds.window.end as f64 }
    }

    pub fn apply(&self, z: f64, t: f64) -> [f64; 2] {
        [z / self.z_max, (t - self.t_start) / (self.t_end - self.t_start)]
    }
}

/// Hourly `(z, t, °C)` training samples of a dataset.
pub fn training_samples(ds: &ReefDataset) -> Vec<(f64, f64, f64)> {
    ds.hourly_obs.iter().map(|o| (o.depth, o.time as f64, o.temp)).collect()
}

/// SST applied unchanged at every depth.
#[derive(Debug, Clone)]
pub struct SatelliteModel {
    pub sst: SstSeries,
}

impl DepthPredictor for SatelliteModel {
    fn predict_at(&self, _z: f64, t: f64) -> Result<f64> {
        self.sst.value_at(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn satellite_ignores_depth() {
        let sst = SstSeries::new(vec![0, 86_400], vec![26.0, 28.0]).unwrap();
        let m = SatelliteModel { sst };
        assert_eq!(m.predict_at(0.0, 43_200.0).unwrap(), 27.0);
        assert_eq!(m.predict_at(20.0, 43_200.0).unwrap(), 27.0);
        assert_eq!(m.predict_at(7.3, 0.0).unwrap(), 26.0);
        assert!(matches!(m.predict_at(1.0, 90_000.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn normalizer_corners() {
        let n = Normalizer { z_max: 20.0, t_start: 100.0, t_end: 300.0 };
        assert_eq!(n.apply(0.0, 100.0), [0.0, 0.0]);
        assert_eq!(n.apply(20.0, 300.0), [1.0, 1.0]);
        assert_eq!(n.apply(10.0, 200.0), [0.5, 0.5]);
    }
}
