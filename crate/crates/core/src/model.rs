//! The PINN forward map: periodic time encoding, gated MLP, hard surface
//! boundary condition and the positivity transform of the physical
//! parameters.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ReefDataset, SstSeries};
use crate::engine::jet::{Order, CH_T, CH_V, CH_Z, CH_ZZ};
use crate::engine::network::{self, NetLayout, Tape};
use crate::engine::ParamVector;
use crate::physics::{
    PhysicalParams, ALPHA_BOUND, GBR_TZ_OFFSET, KAPPA_LITERATURE, KAPPA_MAX, KAPPA_MIN, KD_LITERATURE,
    KD_MAX, KD_MIN,
};
use crate::rng::{stream, stream_rng};
use crate::time::{annual_phase_days, local_hour, DAYS_PER_YEAR, SECONDS_PER_DAY, SECONDS_PER_HOUR};
use crate::{DepthPredictor, Error, Result};

pub const N_DIURNAL: usize = 8;
pub const N_ANNUAL: usize = 3;
pub const WIDTH: usize = 128;
pub const N_HIDDEN: usize = 5;

const CHECKPOINT_FORMAT: &str = "reefpinn-checkpoint/1";
const PREDICT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub n_diurnal: usize,
    pub n_annual: usize,
    pub tz_offset_hours: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self { n_diurnal: N_DIURNAL, n_annual: N_ANNUAL, tz_offset_hours: GBR_TZ_OFFSET }
    }
}

impl EncodingConfig {
    pub fn feature_count(&self) -> usize {
        2 * (self.n_diurnal + self.n_annual)
    }

    /// Network input width: normalised depth plus the periodic features.
    pub fn input_dim(&self) -> usize {
        1 + self.feature_count()
    }

    /// Periodic features of `t` and their time derivatives (per second).
    ///
    /// Layout: `sin, cos` of `2πk·h/24` for k = 1..n_diurnal, then of
    /// `2πk·d/365.25` for k = 1..n_annual, with `h` the local hour and `d` the
    /// annual phase in days.
    pub fn encode_with_rate(&self, t: f64, feats: &mut [f64], rates: &mut [f64]) {
        let h = local_hour(t, self.tz_offset_hours);
        let d = annual_phase_days(t);
        let mut i = 0;
        let blocks = [
            (self.n_diurnal, h / 24.0, 1.0 / (24.0 * SECONDS_PER_HOUR)),
            (self.n_annual, d / DAYS_PER_YEAR, 1.0 / (DAYS_PER_YEAR * SECONDS_PER_DAY)),
        ];
        for (n, phase, phase_rate) in blocks {
            for k in 1..=n {
                let w = 2.0 * PI * k as f64;
                let (s, c) = (w * phase).sin_cos();
                feats[i] = s;
                feats[i + 1] = c;
                rates[i] = c * w * phase_rate;
                rates[i + 1] = -s * w * phase_rate;
                i += 2;
            }
        }
    }

    pub fn encode_time(&self, t: f64) -> Vec<f64> {
        let n = self.feature_count();
        let mut f = vec![0.0; n];
        let mut r = vec![0.0; n];
        self.encode_with_rate(t, &mut f, &mut r);
        f
    }
}

/// Maps unconstrained raw values `(ln κ₀, ln K_d, α)` to bounded physics.
pub fn decode_phys(raw: [f64; 3]) -> PhysicalParams {
    decode_phys_with_jacobian(raw).0
}

/// Decoded parameters and `d(κ₀, K_d, α)/d(raw)`; zero where a bound is active.
pub fn decode_phys_with_jacobian(raw: [f64; 3]) -> (PhysicalParams, [f64; 3]) {
    let k = raw[0].exp();
    let kd = raw[1].exp();
    let kappa0 = k.clamp(KAPPA_MIN, KAPPA_MAX);
    let kd_c = kd.clamp(KD_MIN, KD_MAX);
    let alpha = raw[2].clamp(-ALPHA_BOUND, ALPHA_BOUND);
    let jac = [
        if kappa0 == k { k } else { 0.0 },
        if kd_c == kd { kd } else { 0.0 },
        if alpha == raw[2] { 1.0 } else { 0.0 },
    ];
    (PhysicalParams::new(kappa0, alpha, kd_c), jac)
}

/// Inverse of [`decode_phys`] inside the bounds.
pub fn encode_phys(p: &PhysicalParams) -> [f64; 3] {
    [p.kappa0.ln(), p.kd.ln(), p.alpha]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub width: usize,
    pub n_hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { width: WIDTH, n_hidden: N_HIDDEN }
    }
}

fn param_spec(arch: Architecture, input_dim: usize) -> Vec<(String, usize, usize)> {
    let w = arch.width;
    let mut spec = vec![
        ("enc_u.w".to_string(), input_dim, w),
        ("enc_u.b".to_string(), 1, w),
        ("enc_v.w".to_string(), input_dim, w),
        ("enc_v.b".to_string(), 1, w),
    ];
    for k in 0..arch.n_hidden {
        let fan_in = if k == 0 { input_dim } else { w };
        spec.push((format!("hidden{k}.w"), fan_in, w));
        spec.push((format!("hidden{k}.b"), 1, w));
    }
    spec.push(("head.w".to_string(), w, 1));
    spec.push(("head.b".to_string(), 1, 1));
    spec.push(("phys".to_string(), 1, 3));
    spec
}

/// Output scale from the observed temperature range, °C.
pub fn t_scale_for(range_obs: f64) -> f64 {
    (0.5 * range_obs).max(1.0)
}

/// Network output jet at a batch of points.
pub struct RawJets {
    pub rows: usize,
    pub out: Array2<f64>,
    pub tape: Option<Tape>,
}

/// Temperature and its input derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputDerivs {
    pub temp: f64,
    pub dt_dt: f64,
    pub dt_dz: f64,
    pub d2t_dz2: f64,
}

#[derive(Debug, Clone)]
pub struct PinnModel {
    pub params: ParamVector,
    pub t_scale: f64,
    pub z_max: f64,
    pub encoding: EncodingConfig,
    pub sst: SstSeries,
    pub arch: Architecture,
    layout: NetLayout,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    arch: Architecture,
    encoding: EncodingConfig,
    t_scale: f64,
    z_max: f64,
    params: ParamVector,
    sst: SstSeries,
}

impl PinnModel {
    /// Glorot-uniform weights, zero biases, physics at literature values.
    pub fn init(
        arch: Architecture,
        encoding: EncodingConfig,
        sst: SstSeries,
        z_max: f64,
        t_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let input_dim = encoding.input_dim();
        let spec = param_spec(arch, input_dim);
        let spec_ref: Vec<(&str, usize, usize)> = spec.iter().map(|(n, r, c)| (n.as_str(), *r, *c)).collect();
        let mut params = ParamVector::with_groups(&spec_ref);
        let mut rng = stream_rng(seed, stream::INIT);
        for (name, rows, cols) in &spec {
            if name.ends_with(".w") {
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                let mut view = params.view_mut(name).expect("group");
                view.iter_mut().for_each(|w| *w = rng.gen_range(-limit..limit));
            }
        }
        let raw = encode_phys(&PhysicalParams::new(KAPPA_LITERATURE, 0.0, KD_LITERATURE));
        params.view_mut("phys").expect("phys").iter_mut().zip(raw).for_each(|(p, r)| *p = r);
        Self::from_parts(params, arch, encoding, sst, z_max, t_scale)
    }

    /// Default architecture initialised for `ds`.
    pub fn for_dataset(ds: &ReefDataset, seed: u64) -> Result<Self> {
        Self::for_dataset_with(ds, Architecture::default(), seed)
    }

    pub fn for_dataset_with(ds: &ReefDataset, arch: Architecture, seed: u64) -> Result<Self> {
        let encoding = EncodingConfig { tz_offset_hours: ds.tz_offset_hours, ..Default::default() };
        Self::init(arch, encoding, ds.sst.clone(), ds.z_max, t_scale_for(ds.t_scale_obs), seed)
    }

    pub fn from_parts(
        params: ParamVector,
        arch: Architecture,
        encoding: EncodingConfig,
        sst: SstSeries,
        z_max: f64,
        t_scale: f64,
    ) -> Result<Self> {
        if !(z_max > 0.0) || !(t_scale > 0.0) {
            return Err(Error::Invalid(format!("z_max {z_max} and t_scale {t_scale} must be positive")));
        }
        let layout = NetLayout::resolve(&params, arch.n_hidden)?;
        if layout.input_dim != encoding.input_dim() || layout.width != arch.width {
            return Err(Error::Checkpoint("architecture does not match parameters".into()));
        }
        match params.group("phys") {
            Some(g) if g.len() == 3 => {}
            _ => return Err(Error::Checkpoint("missing phys group".into())),
        }
        Ok(Self { params, t_scale, z_max, encoding, sst, arch, layout })
    }

    pub fn layout(&self) -> &NetLayout {
        &self.layout
    }

    pub fn phys_range(&self) -> std::ops::Range<usize> {
        self.params.group("phys").expect("phys").range()
    }

    pub fn raw_phys_of(&self, p: &[f64]) -> [f64; 3] {
        let r = self.phys_range();
        [p[r.start], p[r.start + 1], p[r.start + 2]]
    }

    /// Decoded physical parameters for an arbitrary parameter vector.
    pub fn phys_of(&self, p: &[f64]) -> (PhysicalParams, [f64; 3]) {
        let (mut phys, jac) = decode_phys_with_jacobian(self.raw_phys_of(p));
        phys.tz_offset_hours = self.encoding.tz_offset_hours;
        (phys, jac)
    }

    pub fn phys(&self) -> PhysicalParams {
        self.phys_of(self.params.values()).0
    }

    /// Stacked input jet for `points`.
    pub fn input_jet(&self, points: &[(f64, f64)], order: Order) -> Array2<f64> {
        let rows = points.len();
        let dim = self.encoding.input_dim();
        let nf = self.encoding.feature_count();
        let mut x = Array2::<f64>::zeros((rows * order.channels(), dim));
        let mut rates = vec![0.0; nf];
        for (i, &(z, t)) in points.iter().enumerate() {
            {
                let mut row = x.row_mut(CH_V * rows + i);
                let row = row.as_slice_mut().expect("row-major");
                row[0] = z / self.z_max;
                self.encoding.encode_with_rate(t, &mut row[1..], &mut rates);
            }
            if order == Order::Full {
                x[[CH_Z * rows + i, 0]] = 1.0 / self.z_max;
                let mut row = x.row_mut(CH_T * rows + i);
                row.as_slice_mut().expect("row-major")[1..].copy_from_slice(&rates);
            }
        }
        x
    }

    /// Raw network output `f_nn` (and its jet) at `points` under parameters `p`.
    pub fn raw_jets(&self, p: &[f64], points: &[(f64, f64)], order: Order, keep_tape: bool) -> RawJets {
        let x = self.input_jet(points, order);
        let (out, tape) = network::forward(&self.layout, p, order, points.len(), x, keep_tape);
        RawJets { rows: points.len(), out, tape }
    }

    pub fn backward(&self, p: &[f64], jets: &RawJets, out_bar: &Array2<f64>, grad: &mut [f64]) {
        let tape = jets.tape.as_ref().expect("forward pass kept its tape");
        network::backward(&self.layout, p, tape, out_bar, grad);
    }

    fn check_domain(&self, z: f64, t: f64) -> Result<()> {
        if !(0.0..=self.z_max).contains(&z) {
            return Err(Error::OutOfDomain(format!("depth {z} outside [0, {}]", self.z_max)));
        }
        if !(t >= self.sst.start() as f64 && t <= self.sst.end() as f64) {
            return Err(Error::OutOfDomain(format!("time {t} outside SST coverage")));
        }
        Ok(())
    }

    /// Raw network output at one point.
    pub fn forward_raw(&self, z: f64, t: f64) -> Result<f64> {
        let j = self.raw_jets(self.params.values(), &[(z, t)], Order::Value, false);
        let f = j.out[[0, 0]];
        if !f.is_finite() {
            return Err(Error::NonFiniteOutput { z, t });
        }
        Ok(f)
    }

    /// `T = SST(t) + (z/z_max)·T_scale·f_nn(z, t)`.
    pub fn predict(&self, z: f64, t: f64) -> Result<f64> {
        Ok(self.predict_batch(&[(z, t)])?[0])
    }

    pub fn predict_batch(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(PREDICT_CHUNK) {
            for &(z, t) in chunk {
                self.check_domain(z, t)?;
            }
            let j = self.raw_jets(self.params.values(), chunk, Order::Value, false);
            for (i, &(z, t)) in chunk.iter().enumerate() {
                let f = j.out[[i, 0]];
                if !f.is_finite() {
                    return Err(Error::NonFiniteOutput { z, t });
                }
                let s = self.sst.value_at(t)?;
                out.push(s + (z / self.z_max) * self.t_scale * f);
            }
        }
        Ok(out)
    }

    /// Temperature jets `(T, ∂T/∂t, ∂T/∂z, ∂²T/∂z²)` from a full-order raw jet.
    pub fn temperature_jets(&self, points: &[(f64, f64)], jets: &RawJets) -> Result<Vec<InputDerivs>> {
        let rows = jets.rows;
        let (ts, zm) = (self.t_scale, self.z_max);
        points
            .iter()
            .enumerate()
            .map(|(i, &(z, t))| {
                let fv = jets.out[[CH_V * rows + i, 0]];
                let fz = jets.out[[CH_Z * rows + i, 0]];
                let ft = jets.out[[CH_T * rows + i, 0]];
                let fzz = jets.out[[CH_ZZ * rows + i, 0]];
                let phi = z / zm;
                let d = InputDerivs {
                    temp: self.sst.value_at(t)? + phi * ts * fv,
                    dt_dt: self.sst.slope_at(t)? + phi * ts * ft,
                    dt_dz: ts / zm * fv + phi * ts * fz,
                    d2t_dz2: 2.0 * ts / zm * fz + phi * ts * fzz,
                };
                if [d.temp, d.dt_dt, d.dt_dz, d.d2t_dz2].iter().all(|v| v.is_finite()) {
                    Ok(d)
                } else {
                    Err(Error::NonFiniteOutput { z, t })
                }
            })
            .collect()
    }

    /// `(T, ∂T/∂t, ∂T/∂z, ∂²T/∂z²)` at each point under the current weights.
    pub fn input_derivatives(&self, points: &[(f64, f64)]) -> Result<Vec<InputDerivs>> {
        self.input_derivatives_with(self.params.values(), points)
    }

    /// As [`PinnModel::input_derivatives`] under an arbitrary parameter vector.
    pub fn input_derivatives_with(&self, p: &[f64], points: &[(f64, f64)]) -> Result<Vec<InputDerivs>> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(PREDICT_CHUNK) {
            for &(z, t) in chunk {
                self.check_domain(z, t)?;
            }
            let j = self.raw_jets(p, chunk, Order::Full, false);
            out.extend(self.temperature_jets(chunk, &j)?);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            arch: self.arch,
            encoding: self.encoding,
            t_scale: self.t_scale,
            z_max: self.z_max,
            params: self.params.clone(),
            sst: self.sst.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&ck)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format tag `{}`", ck.format)));
        }
        let params = ParamVector::from_parts(ck.params.values().to_vec(), ck.params.groups().to_vec())?;
        Self::from_parts(params, ck.arch, ck.encoding, ck.sst, ck.z_max, ck.t_scale)
    }
}

impl DepthPredictor for PinnModel {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        self.predict(z, t)
    }

    fn predict_many(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        self.predict_batch(points)
    }
}
