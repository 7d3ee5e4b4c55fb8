//! Holdout and sparsity experiments, the synthetic twin generator, RMSE,
//! and result files.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::fd::{fd_solve_with, FdGrid};
use crate::baselines::{
    training_samples, FdBaseline, GpModel, IdwModel, NnModel, Normalizer, RfConfig, RfModel, SatelliteModel,
};
use crate::dataset::{build_dataset, Observation, ReefDataset, SstSeries, Window};
use crate::physics::PhysicalParams;
use crate::rng::{stream, stream_rng};
use crate::time::{annual_phase_days, day_floor, Timestamp, DAY, DAYS_PER_YEAR};
use crate::training::{train, TrainConfig};
use crate::{DepthPredictor, Error, Result};

/// Depths this close to the holdout never train.
pub const EXCLUSION_RADIUS: f64 = 0.3;
pub const DEFAULT_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];
pub const DEFAULT_LEVELS: [usize; 5] = [17, 10, 5, 3, 2];

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: obs.len() });
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("RMSE of empty vectors".into()));
    }
    let se: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((se / pred.len() as f64).sqrt())
}

/// Training depths for a holdout: drop everything within
/// [`EXCLUSION_RADIUS`], keep both ends, then fill the depth nearest each
/// evenly spaced target (ties to the shallower depth).
pub fn select_train_depths(available: &[f64], holdout: f64, k: usize) -> Result<Vec<f64>> {
    let mut rest: Vec<f64> =
        available.iter().copied().filter(|d| (d - holdout).abs() > EXCLUSION_RADIUS).collect();
    rest.sort_by(f64::total_cmp);
    rest.dedup();
    if k < 2 || rest.len() < 2 {
        return Err(Error::TooFewDepths(format!(
            "need k ≥ 2 and two usable depths; k = {k}, usable = {rest:?}"
        )));
    }
    if k >= rest.len() {
        return Ok(rest);
    }
    let (lo, hi) = (rest[0], rest[rest.len() - 1]);
    let mut taken = vec![false; rest.len()];
    taken[0] = true;
    taken[rest.len() - 1] = true;
    for j in 1..k - 1 {
        let target = lo + (hi - lo) * j as f64 / (k - 1) as f64;
        let pick = (0..rest.len())
            .filter(|&i| !taken[i])
            .min_by(|&a, &b| (rest[a] - target).abs().total_cmp(&(rest[b] - target).abs()).then(a.cmp(&b)))
            .expect("k < available");
        taken[pick] = true;
    }
    Ok(rest.into_iter().zip(taken).filter(|p| p.1).map(|p| p.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pinn,
    Gp,
    Idw,
    Nn,
    Rf,
    Fd,
    Satellite,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Pinn, Method::Gp, Method::Idw, Method::Nn, Method::Rf, Method::Fd, Method::Satellite];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "pinn",
            Method::Gp => "gp",
            Method::Idw => "idw",
            Method::Nn => "nn",
            Method::Rf => "rf",
            Method::Fd => "fd",
            Method::Satellite => "satellite",
        }
    }

    /// Whether the fit depends on the seed.
    pub fn is_seeded(self) -> bool {
        matches!(self, Method::Pinn | Method::Gp | Method::Rf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub holdout_depth: f64,
    /// `None` trains on every usable depth.
    pub n_train_depths: Option<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub rf: RfConfig,
}

impl ExperimentSpec {
    pub fn new(dataset: &str, holdout_depth: f64, n_train_depths: Option<usize>) -> Self {
        Self {
            dataset: dataset.to_string(),
            holdout_depth,
            n_train_depths,
            methods: Method::ALL.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            train: TrainConfig::default(),
            rf: RfConfig::default(),
        }
    }
}

/// One method at one seed. Contains nothing run-dependent, so reruns give
/// identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub dataset: String,
    pub holdout_depth: f64,
    pub k: usize,
    pub train_depths: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub rmse: f64,
    pub n_eval: usize,
    pub learned: Option<PhysicalParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_rmse: f64,
    /// Population standard deviation over seeds.
    pub std_rmse: f64,
    pub n_seeds: usize,
}

impl MethodSummary {
    pub fn cv(&self) -> f64 {
        self.std_rmse / self.mean_rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub holdout_depth: f64,
    pub train_depths: Vec<f64>,
    pub runs: Vec<MethodRun>,
    pub summary: Vec<MethodSummary>,
    /// Wall time per `(method, seed)`, s; kept out of the result files.
    #[serde(skip)]
    pub wall_seconds: Vec<(Method, u64, f64)>,
}

impl ExperimentResult {
    pub fn k(&self) -> usize {
        self.train_depths.len()
    }

    pub fn summary_for(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == m)
    }

    pub fn rmse(&self, m: Method, seed: u64) -> Option<f64> {
        self.runs.iter().find(|r| r.method == m && r.seed == seed).map(|r| r.rmse)
    }
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

fn summarize(runs: &[MethodRun]) -> Vec<MethodSummary> {
    let mut by: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for r in runs {
        by.entry(r.method).or_default().push(r.rmse);
    }
    by.into_iter()
        .map(|(method, v)| {
            let (mean_rmse, std_rmse) = mean_std(&v);
            MethodSummary { method, mean_rmse, std_rmse, n_seeds: v.len() }
        })
        .collect()
}

/// Hourly observations at the holdout depth.
#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train: ReefDataset,
    pub eval: Vec<Observation>,
    pub holdout_depth: f64,
}

/// Restricts `ds` to the selected training depths and collects the
/// holdout observations.
pub fn holdout_split(ds: &ReefDataset, holdout: f64, k: Option<usize>) -> Result<HoldoutSplit> {
    let depth = ds
        .depths
        .iter()
        .copied()
        .find(|d| (d - holdout).abs() < 1e-9)
        .ok_or_else(|| Error::Invalid(format!("holdout depth {holdout} not among {:?}", ds.depths)))?;
    let depths = select_train_depths(&ds.depths, depth, k.unwrap_or(usize::MAX))?;
    let train = ds.restrict_depths(&depths)?;
    assert!(
        train.hourly_obs.iter().all(|o| (o.depth - depth).abs() > EXCLUSION_RADIUS),
        "training data within the exclusion radius of the holdout"
    );
    Ok(HoldoutSplit { train, eval: ds.hourly_at(depth), holdout_depth: depth })
}

/// RMSE of `model` over the observations accepted by `keep`.
pub fn evaluate(model: &dyn DepthPredictor, eval: &[Observation], keep: impl Fn(f64) -> bool) -> Result<(f64, usize)> {
    let obs: Vec<&Observation> = eval.iter().filter(|o| keep(o.time as f64)).collect();
    let points: Vec<(f64, f64)> = obs.iter().map(|o| (o.depth, o.time as f64)).collect();
    let pred = model.predict_many(&points)?;
    let truth: Vec<f64> = obs.iter().map(|o| o.temp).collect();
    Ok((rmse(&pred, &truth)?, obs.len()))
}

struct Fitted {
    model: Box<dyn DepthPredictor>,
    learned: Option<PhysicalParams>,
    eval_from: f64,
}

fn fit_method(method: Method, train_ds: &ReefDataset, seed: u64, spec: &ExperimentSpec) -> Result<Fitted> {
    let norm = Normalizer::for_dataset(train_ds);
    let samples = || training_samples(train_ds);
    let plain = |m: Box<dyn DepthPredictor>| Fitted { model: m, learned: None, eval_from: f64::NEG_INFINITY };
    Ok(match method {
        Method::Pinn => {
            let cfg = TrainConfig { seed, ..spec.train.clone() };
            let out = train(train_ds, &cfg)?;
            Fitted { learned: Some(out.learned), model: Box::new(out.model), eval_from: f64::NEG_INFINITY }
        }
        Method::Gp => plain(Box::new(GpModel::fit(&samples(), norm, seed)?)),
        Method::Idw => plain(Box::new(IdwModel::fit(&samples(), norm)?)),
        Method::Nn => plain(Box::new(NnModel::fit(&samples(), norm)?)),
        Method::Rf => plain(Box::new(RfModel::fit(&samples(), norm, train_ds.tz_offset_hours, spec.rf, seed)?)),
        Method::Fd => {
            let fd = FdBaseline::fit(train_ds)?;
            let eval_from = fd.eval_from;
            Fitted { model: Box::new(fd), learned: None, eval_from }
        }
        Method::Satellite => plain(Box::new(SatelliteModel { sst: train_ds.sst.clone() })),
    })
}

/// Trains every method of `spec` on the training depths and scores it at
/// the holdout depth. Seed-invariant methods are fitted once and reported
/// under every seed.
pub fn run_holdout(spec: &ExperimentSpec, ds: &ReefDataset) -> Result<ExperimentResult> {
    run_holdout_with(spec, ds, |_, _, _| {})
}

/// As [`run_holdout`], calling `progress(method, seed, rmse)` per run.
pub fn run_holdout_with(
    spec: &ExperimentSpec,
    ds: &ReefDataset,
    mut progress: impl FnMut(Method, u64, f64),
) -> Result<ExperimentResult> {
    if spec.seeds.is_empty() || spec.methods.is_empty() {
        return Err(Error::Invalid("experiment needs at least one method and one seed".into()));
    }
    let split = holdout_split(ds, spec.holdout_depth, spec.n_train_depths)?;
    let k = split.train.depths.len();
    let mut runs = Vec::new();
    let mut wall = Vec::new();
    for &method in &spec.methods {
        let mut shared: Option<(f64, usize, Option<PhysicalParams>, f64)> = None;
        for &seed in &spec.seeds {
            let (score, n_eval, learned, secs) = match shared {
                Some(s) if !method.is_seeded() => s,
                _ => {
                    let started = Instant::now();
                    let fitted = fit_method(method, &split.train, seed, spec)?;
                    let (score, n) = evaluate(fitted.model.as_ref(), &split.eval, |t| t >= fitted.eval_from)?;
                    (score, n, fitted.learned, started.elapsed().as_secs_f64())
                }
            };
            shared = Some((score, n_eval, learned, secs));
            progress(method, seed, score);
            wall.push((method, seed, secs));
            runs.push(MethodRun {
                dataset: spec.dataset.clone(),
                holdout_depth: split.holdout_depth,
                k,
                train_depths: split.train.depths.clone(),
                method,
                seed,
                rmse: score,
                n_eval,
                learned,
            });
        }
    }
    Ok(ExperimentResult {
        dataset: spec.dataset.clone(),
        holdout_depth: split.holdout_depth,
        train_depths: split.train.depths.clone(),
        summary: summarize(&runs),
        runs,
        wall_seconds: wall,
    })
}

/// One holdout experiment per sparsity level.
pub fn run_sparsity(spec: &ExperimentSpec, ds: &ReefDataset, levels: &[usize]) -> Result<Vec<ExperimentResult>> {
    levels
        .iter()
        .map(|&k| run_holdout(&ExperimentSpec { n_train_depths: Some(k), ..spec.clone() }, ds))
        .collect()
}

pub fn run_dir_name(dataset: &str, holdout: f64, k: usize) -> String {
    format!("{dataset}-h{holdout}-k{k}")
}

/// Writes `<out>/<dataset>-h<h>-k<k>/<method>-s<seed>.json` per run plus a
/// `timing.csv`; returns the run directory. Other files there are left alone.
pub fn write_result_files(out: &Path, result: &ExperimentResult) -> Result<PathBuf> {
    let dir = out.join(run_dir_name(&result.dataset, result.holdout_depth, result.k()));
    std::fs::create_dir_all(&dir)?;
    for r in &result.runs {
        let path = dir.join(format!("{}-s{}.json", r.method, r.seed));
        std::fs::write(path, serde_json::to_vec_pretty(r)?)?;
    }
    let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
    w.write_record(["method", "seed", "wall_seconds"])?;
    for (m, s, secs) in &result.wall_seconds {
        w.write_record([m.name().to_string(), s.to_string(), format!("{secs:.3}")])?;
    }
    w.flush()?;
    Ok(dir)
}

/// Every `<method>-s<seed>.json` under `root` (searched recursively).
pub fn read_result_files(root: &Path) -> Result<Vec<MethodRun>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "json")
                && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.contains("-s"))
            {
                out.push(serde_json::from_slice(&std::fs::read(&p)?)?);
            }
        }
    }
    out.sort_by(|a: &MethodRun, b: &MethodRun| {
        (a.dataset.as_str(), a.k, a.method, a.seed)
            .cmp(&(b.dataset.as_str(), b.k, b.method, b.seed))
            .then(a.holdout_depth.total_cmp(&b.holdout_depth))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub holdout_depth: f64,
    pub k: usize,
    pub summaries: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinFraction {
    pub baseline: Method,
    pub pinn_wins: usize,
    pub comparisons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub win_fractions: Vec<WinFraction>,
    pub pinn_params: Vec<ParamSummary>,
}

pub fn build_report(runs: &[MethodRun]) -> Report {
    let mut groups: BTreeMap<(String, u64, usize), Vec<MethodRun>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.dataset.clone(), r.holdout_depth.to_bits(), r.k)).or_default().push(r.clone());
    }
    let rows = groups
        .iter()
        .map(|((d, h, k), rs)| ReportRow {
            dataset: d.clone(),
            holdout_depth: f64::from_bits(*h),
            k: *k,
            summaries: summarize(rs),
        })
        .collect();

    let mut wins: BTreeMap<Method, (usize, usize)> = BTreeMap::new();
    for rs in groups.values() {
        for p in rs.iter().filter(|r| r.method == Method::Pinn) {
            for b in rs.iter().filter(|r| r.method != Method::Pinn && r.seed == p.seed) {
                let e = wins.entry(b.method).or_default();
                e.0 += (p.rmse < b.rmse) as usize;
                e.1 += 1;
            }
        }
    }
    let win_fractions =
        wins.into_iter().map(|(baseline, (w, n))| WinFraction { baseline, pinn_wins: w, comparisons: n }).collect();

    let learned: Vec<PhysicalParams> = runs.iter().filter_map(|r| r.learned).collect();
    let pinn_params = if learned.is_empty() {
        Vec::new()
    } else {
        let fields: [(&str, fn(&PhysicalParams) -> f64); 3] =
            [("kappa0", |p| p.kappa0), ("alpha", |p| p.alpha), ("kd", |p| p.kd)];
        fields
            .iter()
            .map(|(name, f)| {
                let v: Vec<f64> = learned.iter().map(f).collect();
                let (mean, std) = mean_std(&v);
                ParamSummary { name: name.to_string(), mean, std, n: v.len() }
            })
            .collect()
    };
    Report { rows, win_fractions, pinn_params }
}

/// RMSE matrix: one row per `(dataset, holdout, k)`, one column per method
/// holding the seed-mean RMSE.
pub fn write_rmse_matrix<W: Write>(out: W, report: &Report) -> Result<()> {
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| report.rows.iter().any(|r| r.summaries.iter().any(|s| s.method == *m)))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["dataset".to_string(), "holdout_m".into(), "k".into()];
    header.extend(methods.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![r.dataset.clone(), r.holdout_depth.to_string(), r.k.to_string()];
        for m in &methods {
            rec.push(r.summaries.iter().find(|s| s.method == *m).map_or(String::new(), |s| s.mean_rmse.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_win_fractions<W: Write>(out: W, report: &Report) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["baseline", "pinn_wins", "comparisons", "fraction"])?;
    for f in &report.win_fractions {
        let frac = f.pinn_wins as f64 / f.comparisons as f64;
        w.write_record([f.baseline.name().to_string(), f.pinn_wins.to_string(), f.comparisons.to_string(), frac.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_param_summary<W: Write>(out: W, report: &Report) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "mean", "std", "n"])?;
    for p in &report.pinn_params {
        w.write_record([p.name.clone(), p.mean.to_string(), p.std.to_string(), p.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Twin generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub params: PhysicalParams,
    pub depths: Vec<f64>,
    pub window: Window,
    /// Virtual logger sampling interval, s.
    pub cadence: i64,
    pub noise_sd: f64,
    pub seed: u64,
    pub nz: usize,
    pub dt: f64,
    /// Spin-up run before the window, s.
    pub spinup: i64,
}

impl SynthConfig {
    pub fn new(params: PhysicalParams, depths: Vec<f64>, window: Window, cadence: i64, noise_sd: f64, seed: u64) -> Self {
        Self { params, depths, window, cadence, noise_sd, seed, nz: 200, dt: 900.0, spinup: 14 * DAY }
    }
}

/// Daily SST of the twin at each UTC date, evaluated at the local midnight
/// that starts it.
pub fn synth_sst(start: Timestamp, end: Timestamp, tz_offset_hours: f64) -> Result<SstSeries> {
    let first = day_floor(start);
    let last = day_floor(end) + if day_floor(end) < end { DAY } else { 0 };
    let times: Vec<Timestamp> = (0..).map(|k| first + k * DAY).take_while(|&t| t <= last).collect();
    let values = times
        .iter()
        .map(|&t| {
            let local_midnight = t as f64 - tz_offset_hours * 3600.0;
            let day = annual_phase_days(local_midnight);
            27.0 + 2.0 * (2.0 * std::f64::consts::PI * day / DAYS_PER_YEAR).sin()
        })
        .collect();
    SstSeries::new(times, values)
}

/// Twin dataset plus the fine-grid field it was sampled from.
pub struct SynthOutput {
    pub dataset: ReefDataset,
    pub truth: FdGrid,
}

/// Synthetic reef: FD truth on a fine grid started `spinup` before the
/// window, sampled by virtual loggers with Gaussian noise.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    let w = cfg.window;
    let tz = cfg.params.tz_offset_hours;
    let run_start = w.start - cfg.spinup;
    let sst = synth_sst(run_start, w.end, tz)?;
    let z_max = cfg.depths.iter().copied().fold(crate::dataset::Z_MAX_FLOOR, f64::max).ceil();
    if cfg.depths.iter().any(|d| !(0.0..=z_max).contains(d)) {
        return Err(Error::Invalid("twin depths must lie in [0, z_max]".into()));
    }
    if cfg.cadence <= 0 || !(cfg.noise_sd >= 0.0) {
        return Err(Error::Invalid("cadence must be positive and noise non-negative".into()));
    }
    let truth = fd_solve_with(&sst, &cfg.params, z_max, run_start, w.end, cfg.nz, cfg.dt)?;
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rng = stream_rng(cfg.seed, stream::SYNTH_NOISE);
    let mut obs = Vec::new();
    for &z in &cfg.depths {
        let mut t = w.start;
        while t <= w.end {
            let temp = truth.predict(z, t as f64)? + if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            obs.push(Observation { time: t, depth: z, temp, qc_pass: true });
            t += cfg.cadence;
        }
    }
    let dataset = build_dataset("synthetic", &obs, sst, w, tz)?;
    Ok(SynthOutput { dataset, truth })
}

/// The acceptance twin: literature physics, five depths, one year.
pub fn default_twin_config(params: PhysicalParams, seed: u64) -> SynthConfig {
    let start: Timestamp = 1_577_836_800; // 2020-01-01T00:00:00Z
    let window = Window { start, end: start + 365 * DAY };
    SynthConfig::new(params, vec![0.5, 3.0, 5.0, 10.0, 18.0], window, 600, 0.05, seed)
}

/// RMS departure of an evenly sampled series from its centred one-day
/// moving mean. `per_day` is the number of samples per day.
pub fn diurnal_amplitude(values: &[f64], per_day: usize) -> f64 {
    let half = per_day / 2;
    if values.len() <= 2 * half {
        return 0.0;
    }
    let resid: Vec<f64> = (half..values.len() - half)
        .map(|i| {
            let w = &values[i - half..=i + half];
            values[i] - w.iter().sum::<f64>() / w.len() as f64
        })
        .collect();
    (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::time::HOUR;
    use proptest::prelude::*;

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2f64.sqrt());
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { left: 1, right: 2 })));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn depth_selection_examples() {
        assert_eq!(select_train_depths(&[1.0, 6.0, 9.0], 9.0, 2).unwrap(), vec![1.0, 6.0]);
        let d = select_train_depths(&[1.0, 4.8, 5.0, 7.0, 12.0], 5.0, 10).unwrap();
        assert_eq!(d, vec![1.0, 7.0, 12.0]);
        assert_eq!(select_train_depths(&[0.0, 5.0, 10.0, 15.0, 20.0], 10.0, 3).unwrap(), vec![0.0, 5.0, 20.0]);
        assert_eq!(select_train_depths(&[0.0, 5.0, 10.0, 15.0, 20.0], 10.0, 2).unwrap(), vec![0.0, 20.0]);
        assert!(matches!(select_train_depths(&[1.0, 5.0], 5.0, 2), Err(Error::TooFewDepths(_))));
        assert!(select_train_depths(&[1.0, 3.0, 5.0], 5.0, 1).is_err());
    }

    fn max_gap(d: &[f64]) -> f64 {
        d.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn subsets(items: &[f64], k: usize) -> Vec<Vec<f64>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        if items.len() < k {
            return Vec::new();
        }
        let mut with: Vec<Vec<f64>> =
            subsets(&items[1..], k - 1).into_iter().map(|mut s| { s.insert(0, items[0]); s }).collect();
        with.extend(subsets(&items[1..], k));
        with
    }

    #[test]
    fn three_of_five_minimises_max_gap() {
        let avail = [0.0, 5.0, 15.0, 20.0];
        let best = subsets(&avail, 3)
            .iter()
            .filter(|s| s[0] == 0.0 && s[2] == 20.0)
            .map(|s| max_gap(s))
            .fold(f64::INFINITY, f64::min);
        let pick = select_train_depths(&[0.0, 5.0, 10.0, 15.0, 20.0], 10.0, 3).unwrap();
        assert_eq!(max_gap(&pick), best);
    }

    proptest! {
        #[test]
        fn selection_invariants(
            raw in proptest::collection::btree_set(0u32..400, 3..25),
            h_idx in 0usize..25,
            k in 2usize..12,
        ) {
            let avail: Vec<f64> = raw.iter().map(|&d| d as f64 / 20.0).collect();
            let holdout = avail[h_idx % avail.len()];
            match select_train_depths(&avail, holdout, k) {
                Ok(sel) => {
                    let usable: Vec<f64> = avail.iter().copied().filter(|d| (d - holdout).abs() > EXCLUSION_RADIUS).collect();
                    prop_assert!(sel.iter().all(|d| (d - holdout).abs() > EXCLUSION_RADIUS));
                    prop_assert_eq!(sel.len(), k.min(usable.len()));
                    prop_assert_eq!(sel[0], usable[0]);
                    prop_assert_eq!(*sel.last().unwrap(), *usable.last().unwrap());
                    prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
                }
                Err(Error::TooFewDepths(_)) => {
                    let usable = avail.iter().filter(|d| (*d - holdout).abs() > EXCLUSION_RADIUS).count();
                    prop_assert!(usable < 2);
                }
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    fn short_twin(noise: f64, days: i64) -> SynthOutput {
        let start: Timestamp = 1_577_836_800;
        let window = Window { start, end: start + days * DAY };
        let cfg = SynthConfig::new(PhysicalParams::literature(), vec![0.0, 1.0, 5.0, 10.0, 18.0], window, 600, noise, 7);
        synth_generate(&cfg).unwrap()
    }

    #[test]
    fn noise_free_twin_lies_on_the_field() {
        let out = short_twin(0.0, 5);
        for o in &out.dataset.raw_obs {
            assert!((o.temp - out.truth.predict(o.depth, o.time as f64).unwrap()).abs() <= 1e-6);
        }
        for o in out.dataset.raw_obs.iter().filter(|o| o.depth == 0.0) {
            assert!((o.temp - out.dataset.sst.value_at(o.time as f64).unwrap()).abs() <= 1e-9);
        }
        assert_eq!(out.dataset.z_max, 20.0);
    }

    #[test]
    fn diurnal_swing_decays_below_its_peak() {
        // The surface is pinned to daily SST, so the swing peaks a few metres
        // down and decays from there.
        let out = short_twin(0.0, 40);
        let amp = |z: f64| -> f64 {
            let v: Vec<f64> = (0..40 * 24).map(|h| out.truth.predict(z, (out.dataset.window.start + h * HOUR) as f64).unwrap()).collect();
            diurnal_amplitude(&v, 24)
        };
        let (a0, a5, a10, a18) = (amp(0.0), amp(5.0), amp(10.0), amp(18.0));
        assert!(a0 < 1e-4, "{a0}");
        assert!(a18 < a10 && a10 < a5, "{a5} {a10} {a18}");
    }

    #[test]
    fn twin_noise_is_seeded() {
        let a = short_twin(0.05, 3);
        let b = short_twin(0.05, 3);
        assert_eq!(a.dataset.raw_obs, b.dataset.raw_obs);
        let resid: Vec<f64> = a
            .dataset
            .raw_obs
            .iter()
            .map(|o| o.temp - a.truth.predict(o.depth, o.time as f64).unwrap())
            .collect();
        let (m, s) = mean_std(&resid);
        assert!(m.abs() < 0.01 && (s - 0.05).abs() < 0.005, "mean {m}, sd {s}");
    }

    #[test]
    fn satellite_scores_zero_when_obs_equal_sst() {
        let out = short_twin(0.0, 20);
        let mut spec = ExperimentSpec::new("twin", 0.0, Some(2));
        spec.methods = vec![Method::Satellite, Method::Nn];
        spec.seeds = vec![1, 2];
        let res = run_holdout(&spec, &out.dataset).unwrap();
        // Hourly means sit half an hour off the SST interpolant.
        assert!(res.rmse(Method::Satellite, 1).unwrap() < 2e-3);
        assert_eq!(res.rmse(Method::Nn, 1), res.rmse(Method::Nn, 2));
        assert_eq!(res.train_depths, vec![1.0, 18.0]);
    }

    #[test]
    fn holdout_results_are_deterministic_files() {
        let out = short_twin(0.05, 16);
        let mut spec = ExperimentSpec::new("twin", 5.0, Some(3));
        spec.methods = Method::ALL.to_vec();
        spec.seeds = vec![42, 43];
        spec.train = TrainConfig {
            epochs: 20,
            batch_size: 64,
            n_collocation: 64,
            n_bc_points: 8,
            resample_every: 10,
            arch: Architecture { width: 12, n_hidden: 2 },
            ..TrainConfig::default()
        };
        spec.rf = RfConfig { n_trees: 5, ..RfConfig::default() };
        let a = run_holdout(&spec, &out.dataset).unwrap();
        let b = run_holdout(&spec, &out.dataset).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.train_depths, vec![0.0, 10.0, 18.0]);
        for m in [Method::Idw, Method::Nn, Method::Fd, Method::Satellite] {
            assert_eq!(a.rmse(m, 42), a.rmse(m, 43));
        }
        assert!(a.runs.iter().filter(|r| r.method == Method::Pinn).all(|r| r.learned.is_some()));
        // FD only scores after its spin-up; the twin SST starts 14 days early.
        let fd = a.runs.iter().find(|r| r.method == Method::Fd).unwrap();
        let pinn = a.runs.iter().find(|r| r.method == Method::Pinn).unwrap();
        assert_eq!(fd.n_eval, pinn.n_eval);

        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let p1 = write_result_files(d1.path(), &a).unwrap();
        let p2 = write_result_files(d2.path(), &b).unwrap();
        assert_eq!(p1.file_name(), Some(std::ffi::OsStr::new("twin-h5-k3")));
        for m in Method::ALL {
            let f = format!("{m}-s42.json");
            assert_eq!(std::fs::read(p1.join(&f)).unwrap(), std::fs::read(p2.join(&f)).unwrap());
        }
        let runs = read_result_files(d1.path()).unwrap();
        assert_eq!(runs.len(), 14);
        let report = build_report(&runs);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.win_fractions.len(), 6);
        assert!(report.win_fractions.iter().all(|w| w.comparisons == 2));
        assert_eq!(report.pinn_params.len(), 3);
        let mut buf = Vec::new();
        write_rmse_matrix(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dataset,holdout_m,k,pinn,gp,idw,nn,rf,fd,satellite\n"));
    }

    #[test]
    fn sparsity_runs_one_result_per_level() {
        let out = short_twin(0.0, 3);
        let mut spec = ExperimentSpec::new("twin", 10.0, None);
        spec.methods = vec![Method::Nn, Method::Idw];
        spec.seeds = vec![1];
        let res = run_sparsity(&spec, &out.dataset, &[4, 3, 2]).unwrap();
        assert_eq!(res.iter().map(|r| r.k()).collect::<Vec<_>>(), vec![4, 3, 2]);
        assert_eq!(res[2].train_depths, vec![0.0, 18.0]);
    }

    #[test]
    fn seed_std_is_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
