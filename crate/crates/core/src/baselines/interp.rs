//! Inverse-distance weighting and nearest neighbour in normalised `(z, t)`.

use super::kdtree::KdTree;
use super::Normalizer;
use crate::{DepthPredictor, Error, Result};

pub const IDW_K: usize = 20;
pub const IDW_POWER: f64 = 2.0;
/// Distance below which a query is treated as hitting a training point.
pub const EXACT_HIT: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct IdwModel {
    tree: KdTree,
    values: Vec<f64>,
    norm: Normalizer,
    pub k: usize,
    pub power: f64,
}

fn index(samples: &[(f64, f64, f64)], norm: &Normalizer) -> Result<(KdTree, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no training points".into()));
    }
    let pts = samples.iter().map(|&(z, t, _)| norm.apply(z, t)).collect();
    Ok((KdTree::new(pts), samples.iter().map(|s| s.2).collect()))
}

impl IdwModel {
    /// `samples` are `(z, t, °C)`.
    pub fn fit(samples: &[(f64, f64, f64)], norm: Normalizer) -> Result<Self> {
        Self::fit_with(samples, norm, IDW_K, IDW_POWER)
    }

    pub fn fit_with(samples: &[(f64, f64, f64)], norm: Normalizer, k: usize, power: f64) -> Result<Self> {
        let (tree, values) = index(samples, &norm)?;
        Ok(Self { tree, values, norm, k: k.max(1), power })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.len() == 0
    }
}

impl DepthPredictor for IdwModel {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        let nb = self.tree.nearest(self.norm.apply(z, t), self.k);
        if nb[0].0.sqrt() < EXACT_HIT {
            return Ok(self.values[nb[0].2]);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, _, i) in &nb {
            let w = d2.powf(-0.5 * self.power);
            num += w * self.values[i];
            den += w;
        }
        Ok(num / den)
    }
}

/// Single nearest neighbour; ties go to the shallower, then earlier, point.
#[derive(Debug, Clone)]
pub struct NnModel {
    tree: KdTree,
    values: Vec<f64>,
    norm: Normalizer,
}

impl NnModel {
    pub fn fit(samples: &[(f64, f64, f64)], norm: Normalizer) -> Result<Self> {
        let (tree, values) = index(samples, &norm)?;
        Ok(Self { tree, values, norm })
    }
}

impl DepthPredictor for NnModel {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        Ok(self.values[self.tree.nearest(self.norm.apply(z, t), 1)[0].2])
    }
}
