//! Gaussian-process regression with an RBF + white-noise kernel and
//! grid-searched hyperparameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::Normalizer;
use crate::rng::{stream, stream_rng};
use crate::{DepthPredictor, Error, Result};

pub const GP_SUBSAMPLE: usize = 500;
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

const N_SIGMA_F: usize = 5;
const N_LENGTH: usize = 7;
const N_SIGMA_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub sigma_f: f64,
    pub length: f64,
    pub sigma_n: f64,
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// The 5×7×5 search grid scaled by the target spread `s`.
pub fn hyper_grid(s: f64) -> Vec<GpHyper> {
    let mut grid = Vec::with_capacity(N_SIGMA_F * N_LENGTH * N_SIGMA_N);
    for &sigma_f in &logspace(0.1 * s, 10.0 * s, N_SIGMA_F) {
        for &length in &logspace(0.01, 1.0, N_LENGTH) {
            for &sigma_n in &logspace(1e-3 * s, s, N_SIGMA_N) {
                grid.push(GpHyper { sigma_f, length, sigma_n });
            }
        }
    }
    grid
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Cholesky of `K + (σ_n² + jitter)·I`, escalating the jitter ×10 on failure.
fn factor(d2: &DMatrix<f64>, h: &GpHyper) -> Result<Cholesky<f64, Dyn>> {
    let n = d2.nrows();
    let sf2 = h.sigma_f * h.sigma_f;
    let inv = 1.0 / (2.0 * h.length * h.length);
    let base = DMatrix::from_fn(n, n, |i, j| sf2 * (-d2[(i, j)] * inv).exp());
    let mut jitter = JITTER_START;
    loop {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += h.sigma_n * h.sigma_n + jitter;
        }
        if let Some(c) = Cholesky::new(k) {
            if c.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok(c);
            }
        }
        if jitter >= JITTER_MAX {
            return Err(Error::FactorizationFailure { jitter });
        }
        jitter *= 10.0;
    }
}

fn log_marginal(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    (lml, alpha)
}

#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<[f64; 2]>,
    alpha: DVector<f64>,
    pub mean: f64,
    pub hyper: GpHyper,
    pub log_marginal: f64,
    norm: Normalizer,
}

impl GpModel {
    /// Subsamples to at most [`GP_SUBSAMPLE`] points and picks the grid
    /// hyperparameters with the largest log marginal likelihood.
    pub fn fit(samples: &[(f64, f64, f64)], norm: Normalizer, seed: u64) -> Result<Self> {
        let sub = subsample(samples, GP_SUBSAMPLE, seed)?;
        let (x, y, mean) = prepare(&sub, &norm);
        let spread = std_pop(y.as_slice());
        let d2 = distances(&x);
        let mut best: Option<(f64, GpHyper, DVector<f64>)> = None;
        let mut last_err = None;
        for h in hyper_grid(if spread > 0.0 { spread } else { 1.0 }) {
            match factor(&d2, &h) {
                Ok(chol) => {
                    let (lml, alpha) = log_marginal(&chol, &y);
                    if lml.is_finite() && best.as_ref().map_or(true, |b| lml > b.0) {
                        best = Some((lml, h, alpha));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        match best {
            Some((lml, hyper, alpha)) => Ok(Self { x, alpha, mean, hyper, log_marginal: lml, norm }),
            None => Err(last_err.unwrap_or(Error::FactorizationFailure { jitter: JITTER_MAX })),
        }
    }

    /// Fits all `samples` with fixed hyperparameters.
    pub fn fit_with(samples: &[(f64, f64, f64)], norm: Normalizer, hyper: GpHyper) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no training points".into()));
        }
        let (x, y, mean) = prepare(samples, &norm);
        let chol = factor(&distances(&x), &hyper)?;
        let (lml, alpha) = log_marginal(&chol, &y);
        Ok(Self { x, alpha, mean, hyper, log_marginal: lml, norm })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn subsample(samples: &[(f64, f64, f64)], n: usize, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no training points".into()));
    }
    if samples.len() <= n {
        return Ok(samples.to_vec());
    }
    let mut rng = stream_rng(seed, stream::GP_SUBSAMPLE);
    let mut idx = index::sample(&mut rng, samples.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| samples[i]).collect())
}

fn prepare(samples: &[(f64, f64, f64)], norm: &Normalizer) -> (Vec<[f64; 2]>, DVector<f64>, f64) {
    let x = samples.iter().map(|&(z, t, _)| norm.apply(z, t)).collect();
    let mean = samples.iter().map(|s| s.2).sum::<f64>() / samples.len() as f64;
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.2 - mean));
    (x, y, mean)
}

fn distances(x: &[[f64; 2]]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| sq_dist(x[i], x[j]))
}

fn std_pop(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

impl DepthPredictor for GpModel {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        let q = self.norm.apply(z, t);
        let sf2 = self.hyper.sigma_f * self.hyper.sigma_f;
        let inv = 1.0 / (2.0 * self.hyper.length * self.hyper.length);
        let s: f64 = self.x.iter().zip(self.alpha.iter()).map(|(&x, &a)| a * sf2 * (-sq_dist(x, q) * inv).exp()).sum();
        Ok(self.mean + s)
    }
}
