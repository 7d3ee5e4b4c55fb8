//! Bootstrap random forest of variance-reduction regression trees on
//! `(z, sin h, cos h, t_n)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Normalizer;
use crate::rng::{stream, stream_rng};
use crate::time::local_hour;
use crate::{DepthPredictor, Error, Result};

const N_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 20, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RfModel {
    trees: Vec<Tree>,
    norm: Normalizer,
    tz_offset_hours: f64,
    pub config: RfConfig,
}

fn features(z: f64, t: f64, norm: &Normalizer, tz: f64) -> [f64; N_FEATURES] {
    let h = local_hour(t, tz);
    let (s, c) = (2.0 * PI * h / 24.0).sin_cos();
    [z, s, c, norm.apply(z, t)[1]]
}

/// Per-tree working storage: one index list per feature, each sorted by
/// that feature and kept sorted through stable partitions.
struct Builder<'a> {
    x: Vec<[f64; N_FEATURES]>,
    y: Vec<f64>,
    sorted: [Vec<usize>; N_FEATURES],
    goes_left: Vec<bool>,
    scratch: Vec<usize>,
    cfg: &'a RfConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let idx = &self.sorted[0][lo..hi];
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf || pure {
            self.nodes[id] = Node::Leaf(if pure { self.y[idx[0]] } else { mean });
            return id;
        }
        let Some((feature, threshold, n_left)) = self.best_split(lo, hi, sum) else {
            self.nodes[id] = Node::Leaf(mean);
            return id;
        };
        for &i in &self.sorted[feature][lo..hi] {
            self.goes_left[i] = self.x[i][feature] <= threshold;
        }
        for f in 0..N_FEATURES {
            self.scratch.clear();
            let seg = &mut self.sorted[f][lo..hi];
            let mut w = 0;
            for k in 0..seg.len() {
                let i = seg[k];
                if self.goes_left[i] {
                    seg[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            debug_assert_eq!(w, n_left);
            seg[w..].copy_from_slice(&self.scratch);
        }
        let left = self.build(lo, lo + n_left, depth + 1);
        let right = self.build(lo + n_left, hi, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Best `(feature, threshold, left count)` by squared-error reduction.
    fn best_split(&self, lo: usize, hi: usize, sum: f64) -> Option<(usize, f64, usize)> {
        let n = hi - lo;
        let min_leaf = self.cfg.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64, usize)> = None;
        for f in 0..N_FEATURES {
            let idx = &self.sorted[f][lo..hi];
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.y[idx[k - 1]];
                let (a, b) = (self.x[idx[k - 1]][f], self.x[idx[k]][f]);
                if k < min_leaf || n - k < min_leaf || a == b {
                    continue;
                }
                let right_sum = sum - left_sum;
                let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                if best.map_or(true, |bst| score > bst.0) {
                    let mut thr = 0.5 * (a + b);
                    if thr >= b {
                        thr = a;
                    }
                    best = Some((score, f, thr, k));
                }
            }
        }
        let parent = sum * sum / n as f64;
        best.filter(|b| b.0 > parent).map(|b| (b.1, b.2, b.3))
    }
}

impl RfModel {
    /// `samples` are `(z, t, °C)`; bootstrap draws use the seed's RF stream.
    pub fn fit(
        samples: &[(f64, f64, f64)],
        norm: Normalizer,
        tz_offset_hours: f64,
        cfg: RfConfig,
        seed: u64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no training points".into()));
        }
        let n = samples.len();
        let x_all: Vec<[f64; N_FEATURES]> =
            samples.iter().map(|&(z, t, _)| features(z, t, &norm, tz_offset_hours)).collect();
        let mut rng = stream_rng(seed, stream::RF_BOOTSTRAP);
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let x: Vec<[f64; N_FEATURES]> = boot.iter().map(|&i| x_all[i]).collect();
            let y: Vec<f64> = boot.iter().map(|&i| samples[i].2).collect();
            let sorted = std::array::from_fn(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
                idx
            });
            let mut b = Builder {
                x,
                y,
                sorted,
                goes_left: vec![false; n],
                scratch: Vec::with_capacity(n),
                cfg: &cfg,
                nodes: Vec::new(),
            };
            b.build(0, n, 0);
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(Self { trees, norm, tz_offset_hours, config: cfg })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

impl DepthPredictor for RfModel {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        let x = features(z, t, &self.norm, self.tz_offset_hours);
        Ok(self.trees.iter().map(|tr| tr.predict(&x)).sum::<f64>() / self.trees.len() as f64)
    }
}
