//! Composite loss, PDE-weight curriculum, collocation sampling and the
//! optimisation loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Observation, ReefDataset};
use crate::engine::jet::{Order, CH_T, CH_V, CH_Z, CH_ZZ};
use crate::engine::optim::{LR0, LR_MIN, MAX_GRAD_NORM};
use crate::engine::{adam_step, clip_global_norm, cosine_lr, Objective, OptimizerState};
use crate::model::{Architecture, PinnModel};
use crate::physics::{diurnal_factor, kappa_checked, PhysicalParams, ResidualScale};
use crate::rng::{stream, stream_rng, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub n_collocation: usize,
    pub resample_every: usize,
    pub w_data: f64,
    pub w_bc: f64,
    pub pde_knots: Vec<(usize, f64)>,
    pub n_bc_points: usize,
    pub seed: u64,
    pub lr0: f64,
    pub lr_min: f64,
    pub max_grad_norm: f64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15_000,
            batch_size: 5000,
            n_collocation: 2500,
            resample_every: 2000,
            w_data: 10.0,
            w_bc: 0.1,
            pde_knots: vec![(0, 1.0), (3000, 0.5), (6000, 0.2), (10_000, 0.05)],
            n_bc_points: 200,
            seed: 42,
            lr0: LR0,
            lr_min: LR_MIN,
            max_grad_norm: MAX_GRAD_NORM,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("train config: {m}")));
        if self.epochs == 0 || self.batch_size == 0 || self.resample_every == 0 {
            return bad("epochs, batch_size and resample_every must be positive");
        }
        if self.n_collocation < 2 || self.n_bc_points == 0 {
            return bad("need at least 2 collocation and 1 boundary point");
        }
        if self.pde_knots.is_empty() || self.pde_knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("pde knots must be non-empty and strictly increasing in epoch");
        }
        let weights = [self.w_data, self.w_bc].into_iter().chain(self.pde_knots.iter().map(|k| k.1));
        if weights.into_iter().any(|w| !(w >= 0.0) || !w.is_finite()) {
            return bad("loss weights must be finite and non-negative");
        }
        if !(self.lr0 > 0.0 && self.lr_min >= 0.0 && self.max_grad_norm > 0.0) {
            return bad("learning rates and clip norm must be positive");
        }
        Ok(())
    }
}

/// Piecewise-linear curriculum weight, held constant outside the knots.
pub fn pde_weight(epoch: usize, knots: &[(usize, f64)]) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if epoch <= first.0 {
        return first.1;
    }
    if epoch >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= epoch);
    let ((e0, w0), (e1, w1)) = (knots[i - 1], knots[i]);
    w0 + (w1 - w0) * (epoch - e0) as f64 / (e1 - e0) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    /// `(z, t)` pairs; the uniform half comes first.
    pub points: Vec<(f64, f64)>,
    pub n_uniform: usize,
}

/// Half uniform over the domain, half within ±1 m of a random logger depth.
pub fn sample_collocation(rng: &mut StreamRng, ds: &ReefDataset, n: usize) -> CollocationSet {
    let (t0, t1) = (ds.window.start as f64, ds.window.end as f64);
    let n_uniform = n / 2;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n_uniform {
        let z = rng.gen_range(0.0..=ds.z_max);
        points.push((z, rng.gen_range(t0..=t1)));
    }
    for _ in n_uniform..n {
        let d = ds.depths[rng.gen_range(0..ds.depths.len())];
        let (lo, hi) = ((d - 1.0).max(0.0), (d + 1.0).min(ds.z_max));
        let z = rng.gen_range(lo..=hi);
        points.push((z, rng.gen_range(t0..=t1)));
    }
    CollocationSet { points, n_uniform }
}

/// Bottom-boundary points at `z = z_max` with uniform times.
pub fn sample_bc_points(rng: &mut StreamRng, ds: &ReefDataset, n: usize) -> Vec<(f64, f64)> {
    let (t0, t1) = (ds.window.start as f64, ds.window.end as f64);
    (0..n).map(|_| (ds.z_max, rng.gen_range(t0..=t1))).collect()
}

/// `min(batch_size, N)` observations; with replacement when `N < batch_size`.
pub fn sample_batch(rng: &mut StreamRng, obs: &[Observation], batch_size: usize) -> Vec<Observation> {
    let n = obs.len();
    if n >= batch_size {
        index::sample(rng, n, batch_size).into_iter().map(|i| obs[i]).collect()
    } else {
        (0..n).map(|_| obs[rng.gen_range(0..n)]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub epoch: usize,
    pub total: f64,
    pub l_data: f64,
    pub l_pde: f64,
    pub l_bc: f64,
    pub w_pde_current: f64,
    pub lr: f64,
    /// Collocation points where κ(z) hit its clamp.
    pub kappa_clamped: usize,
}

/// Inputs of one loss evaluation; the weights are fixed per epoch.
pub struct CompositeLoss<'a> {
    pub model: &'a PinnModel,
    pub batch: &'a [Observation],
    pub colloc: &'a [(f64, f64)],
    pub bc_points: &'a [(f64, f64)],
    pub w_data: f64,
    pub w_pde: f64,
    pub w_bc: f64,
}

impl<'a> CompositeLoss<'a> {
    pub fn new(
        model: &'a PinnModel,
        batch: &'a [Observation],
        colloc: &'a CollocationSet,
        bc_points: &'a [(f64, f64)],
        cfg: &TrainConfig,
        epoch: usize,
    ) -> Self {
        Self {
            model,
            batch,
            colloc: &colloc.points,
            bc_points,
            w_data: cfg.w_data,
            w_pde: pde_weight(epoch, &cfg.pde_knots),
            w_bc: cfg.w_bc,
        }
    }

    /// Loss terms at `p`, plus `∂total/∂p` when `grad` is given.
    pub fn evaluate(&self, p: &[f64], mut grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let m = self.model;
        let (ts, zm) = (m.t_scale, m.z_max);
        if self.batch.is_empty() {
            return Err(Error::InsufficientData("empty batch".into()));
        }

        // Data term on the value channel only.
        let pts: Vec<(f64, f64)> = self.batch.iter().map(|o| (o.depth, o.time as f64)).collect();
        let jets = m.raw_jets(p, &pts, Order::Value, grad.is_some());
        let nb = pts.len() as f64;
        let mut l_data = 0.0;
        let mut bar = Array2::<f64>::zeros((pts.len(), 1));
        for (i, o) in self.batch.iter().enumerate() {
            let (z, t) = pts[i];
            let phi = z / zm;
            let e = m.sst.value_at(t)? + phi * ts * jets.out[[i, 0]] - o.temp;
            l_data += e * e;
            bar[[i, 0]] = self.w_data * 2.0 * e / nb * phi * ts;
        }
        l_data /= nb;
        if let Some(g) = grad.as_deref_mut() {
            m.backward(p, &jets, &bar, g);
        }

        // PDE residual on the collocation set.
        let (phys, jac) = m.phys_of(p);
        let scale = ResidualScale::for_domain(zm);
        let rows = self.colloc.len();
        let jets = m.raw_jets(p, self.colloc, Order::Full, grad.is_some());
        let temps = m.temperature_jets(self.colloc, &jets)?;
        let nc = rows as f64;
        let mut l_pde = 0.0;
        let mut clamped = 0;
        let mut bar = Array2::<f64>::zeros((4 * rows, 1));
        let mut phys_bar = [0.0; 3];
        for (i, (&(z, t), d)) in self.colloc.iter().zip(&temps).enumerate() {
            let (kappa, was_clamped) = kappa_checked(z, &phys);
            clamped += was_clamped as usize;
            let fd = diurnal_factor(t, phys.tz_offset_hours);
            let beer = (-phys.kd * z).exp();
            let r = d.dt_dt - kappa * d.d2t_dz2 - phys.q_max * phys.kd * beer * fd / phys.rho_cp;
            let w = scale.t_ref * scale.weight(z);
            let q = r * w;
            l_pde += q * q;
            let r_bar = self.w_pde * 2.0 * q / nc * w;
            let phi = z / zm;
            bar[[CH_T * rows + i, 0]] = r_bar * phi * ts;
            bar[[CH_Z * rows + i, 0]] = -r_bar * kappa * 2.0 * ts / zm;
            bar[[CH_ZZ * rows + i, 0]] = -r_bar * kappa * phi * ts;
            if !was_clamped {
                let e = (phys.alpha * z).exp();
                phys_bar[0] -= r_bar * d.d2t_dz2 * e;
                phys_bar[2] -= r_bar * d.d2t_dz2 * phys.kappa0 * z * e;
            }
            phys_bar[1] -= r_bar * phys.q_max * fd * (1.0 - phys.kd * z) * beer / phys.rho_cp;
        }
        l_pde /= nc;
        if let Some(g) = grad.as_deref_mut() {
            m.backward(p, &jets, &bar, g);
            let r = m.phys_range();
            for k in 0..3 {
                g[r.start + k] += phys_bar[k] * jac[k];
            }
        }

        // Zero-flux bottom.
        let rows = self.bc_points.len();
        let jets = m.raw_jets(p, self.bc_points, Order::Full, grad.is_some());
        let nbc = rows as f64;
        let mut l_bc = 0.0;
        let mut bar = Array2::<f64>::zeros((4 * rows, 1));
        for (i, &(z, _)) in self.bc_points.iter().enumerate() {
            let phi = z / zm;
            let tz = ts / zm * jets.out[[CH_V * rows + i, 0]] + phi * ts * jets.out[[CH_Z * rows + i, 0]];
            l_bc += tz * tz;
            let tz_bar = self.w_bc * 2.0 * tz / nbc;
            bar[[CH_V * rows + i, 0]] = tz_bar * ts / zm;
            bar[[CH_Z * rows + i, 0]] = tz_bar * phi * ts;
        }
        l_bc /= nbc;
        if let Some(g) = grad {
            m.backward(p, &jets, &bar, g);
        }

        let total = self.w_data * l_data + self.w_pde * l_pde + self.w_bc * l_bc;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss(format!("data {l_data}, pde {l_pde}, bc {l_bc}")));
        }
        Ok(LossBreakdown {
            epoch: 0,
            total,
            l_data,
            l_pde,
            l_bc,
            w_pde_current: self.w_pde,
            lr: 0.0,
            kappa_clamped: clamped,
        })
    }
}

impl Objective for CompositeLoss<'_> {
    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.evaluate(p, None)?.total)
    }

    fn value_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; p.len()];
        let lb = self.evaluate(p, Some(&mut g))?;
        Ok((lb.total, g))
    }
}

/// Loss terms of `model` at its current weights.
pub fn compose_loss(
    model: &PinnModel,
    batch: &[Observation],
    colloc: &CollocationSet,
    bc_points: &[(f64, f64)],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<LossBreakdown> {
    let mut lb = CompositeLoss::new(model, batch, colloc, bc_points, cfg, epoch).evaluate(model.params.values(), None)?;
    lb.epoch = epoch;
    Ok(lb)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PinnModel,
    pub history: Vec<LossBreakdown>,
    pub learned: PhysicalParams,
    pub wall_seconds: f64,
}

/// Trains a fresh model on the hourly observations of `ds`.
pub fn train(ds: &ReefDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, |_, _| {})
}

/// As [`train`], calling `observe` after every optimiser step.
pub fn train_with<F>(ds: &ReefDataset, cfg: &TrainConfig, mut observe: F) -> Result<TrainOutcome>
where
    F: FnMut(&LossBreakdown, &PinnModel),
{
    cfg.validate()?;
    if ds.hourly_obs.is_empty() || ds.depths.is_empty() {
        return Err(Error::InsufficientData("no hourly observations to train on".into()));
    }
    let started = Instant::now();
    let mut model = PinnModel::for_dataset_with(ds, cfg.arch, cfg.seed)?;
    let mut opt = OptimizerState::new(model.params.len());
    let mut batch_rng = stream_rng(cfg.seed, stream::BATCH);
    let mut colloc_rng = stream_rng(cfg.seed, stream::COLLOCATION);
    let mut colloc = CollocationSet { points: Vec::new(), n_uniform: 0 };
    let mut bc_points = Vec::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; model.params.len()];

    for epoch in 0..cfg.epochs {
        if epoch % cfg.resample_every == 0 {
            colloc = sample_collocation(&mut colloc_rng, ds, cfg.n_collocation);
            bc_points = sample_bc_points(&mut colloc_rng, ds, cfg.n_bc_points);
        }
        let batch = sample_batch(&mut batch_rng, &ds.hourly_obs, cfg.batch_size);
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr0, cfg.lr_min);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let loss = CompositeLoss::new(&model, &batch, &colloc, &bc_points, cfg, epoch);
        let lb = match loss.evaluate(model.params.values(), Some(&mut grad)) {
            Ok(lb) if grad.iter().all(|g| g.is_finite()) => lb,
            _ => return Err(Error::Diverged { epoch, history: Box::new(history) }),
        };
        let lb = LossBreakdown { epoch, lr, ..lb };
        clip_global_norm(&mut grad, cfg.max_grad_norm);
        adam_step(&mut opt, model.params.values_mut(), &grad, lr);
        if !model.params.all_finite() {
            history.push(lb);
            return Err(Error::Diverged { epoch, history: Box::new(history) });
        }
        history.push(lb);
        observe(&lb, &model);
    }
    let learned = model.phys();
    Ok(TrainOutcome { model, history, learned, wall_seconds: started.elapsed().as_secs_f64() })
}

pub fn write_loss_history<W: Write>(out: W, history: &[LossBreakdown]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "total", "l_data", "l_pde", "l_bc", "lr", "w_pde"])?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            h.total.to_string(),
            h.l_data.to_string(),
            h.l_pde.to_string(),
            h.l_bc.to_string(),
            h.lr.to_string(),
            h.w_pde_current.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Config echo written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub depths: Vec<f64>,
    pub learned: PhysicalParams,
    pub final_loss: Option<LossBreakdown>,
    pub wall_seconds: f64,
}

/// Writes `model.json`, `loss_history.csv` and `run.json` into `dir`.
pub fn write_run(dir: &Path, ds: &ReefDataset, cfg: &TrainConfig, outcome: &TrainOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    outcome.model.save(&dir.join("model.json"))?;
    write_loss_history(std::fs::File::create(dir.join("loss_history.csv"))?, &outcome.history)?;
    let manifest = RunManifest {
        dataset: ds.name.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        depths: ds.depths.clone(),
        learned: outcome.learned,
        final_loss: outcome.history.last().copied(),
        wall_seconds: outcome.wall_seconds,
    };
    std::fs::write(dir.join("run.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}
