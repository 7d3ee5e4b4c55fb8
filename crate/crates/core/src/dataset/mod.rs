//! Logger and SST ingestion, QC, hourly aggregation and dataset assembly.

mod bundle;
mod logger;
mod sst;

pub use bundle::{load_bundle, write_bundle, BundleManifest, BundleReport, FileReport};
pub use logger::{
    aggregate_hourly, depth_from_filename, parse_logger_file, write_canonical_logger, ParseReport,
    ParsedLogger, TEMP_MAX, TEMP_MIN,
};
pub use sst::{load_sst, write_sst, SstSeries, MAX_FILL_DAYS};

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;
use crate::{Error, Result};

/// One temperature sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: Timestamp,
    pub depth: f64,
    pub temp: f64,
    pub qc_pass: bool,
}

/// Closed UTC time range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if end <= start {
            return Err(Error::Invalid(format!("window end {end} not after start {start}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn duration(&self) -> f64 {
        (self.end - self.start) as f64
    }
}

/// Smallest depth bound the domain is allowed to shrink to, in metres.
pub const Z_MAX_FLOOR: f64 = 20.0;

/// Minimum hourly records at one depth for a dataset to be trainable.
pub const MIN_HOURLY_RECORDS: usize = 24;

/// Training corpus for one reef and time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReefDataset {
    pub name: String,
    pub hourly_obs: Vec<Observation>,
    pub raw_obs: Vec<Observation>,
    pub sst: SstSeries,
    pub z_max: f64,
    pub window: Window,
    /// Observed temperature range over `hourly_obs`, °C.
    pub t_scale_obs: f64,
    pub depths: Vec<f64>,
    pub tz_offset_hours: f64,
}

impl ReefDataset {
    /// Hourly observations at exactly `depth`.
    pub fn hourly_at(&self, depth: f64) -> Vec<Observation> {
        self.hourly_obs.iter().filter(|o| o.depth == depth).copied().collect()
    }

    /// Native-cadence observations at exactly `depth`.
    pub fn raw_at(&self, depth: f64) -> Vec<Observation> {
        self.raw_obs.iter().filter(|o| o.depth == depth).copied().collect()
    }

    /// Copy of the dataset keeping only the listed depths.
    ///
    /// `z_max` is kept from the parent so the normalisation of the domain does
    /// not change between a full run and a holdout run.
    pub fn restrict_depths(&self, keep: &[f64]) -> Result<ReefDataset> {
        let keep_obs = |o: &&Observation| keep.contains(&o.depth);
        let hourly: Vec<Observation> = self.hourly_obs.iter().filter(keep_obs).copied().collect();
        let raw: Vec<Observation> = self.raw_obs.iter().filter(keep_obs).copied().collect();
        if hourly.is_empty() {
            return Err(Error::InsufficientData(format!("no observations at depths {keep:?}")));
        }
        let depths = distinct_depths(&hourly);
        Ok(ReefDataset {
            name: self.name.clone(),
            t_scale_obs: temp_range(&hourly),
            hourly_obs: hourly,
            raw_obs: raw,
            sst: self.sst.clone(),
            z_max: self.z_max,
            window: self.window,
            depths,
            tz_offset_hours: self.tz_offset_hours,
        })
    }
}

/// Assembles a dataset from parsed logger records and an SST series.
///
/// QC-failed records and records outside `window` are dropped; the rest are
/// kept at native cadence in `raw_obs` and averaged per UTC hour into
/// `hourly_obs`.
pub fn build_dataset(
    name: &str,
    loggers: &[Observation],
    sst: SstSeries,
    window: Window,
    tz_offset_hours: f64,
) -> Result<ReefDataset> {
    let raw: Vec<Observation> = loggers
        .iter()
        .filter(|o| o.qc_pass && window.contains(o.time))
        .copied()
        .collect();
    let hourly: Vec<Observation> = aggregate_hourly(&raw)
        .into_iter()
        .filter(|o| window.contains(o.time))
        .collect();
    let depths = distinct_depths(&hourly);
    let best = depths
        .iter()
        .map(|&d| hourly.iter().filter(|o| o.depth == d).count())
        .max()
        .unwrap_or(0);
    if best < MIN_HOURLY_RECORDS {
        return Err(Error::InsufficientData(format!(
            "no depth has {MIN_HOURLY_RECORDS} hourly records in the window (best: {best})"
        )));
    }
    if !sst.covers(window.start, window.end) {
        return Err(Error::SstCoverage(format!(
            "SST spans {}..{}, window {}..{}",
            crate::time::format_date(sst.start()),
            crate::time::format_date(sst.end()),
            crate::time::format_instant(window.start),
            crate::time::format_instant(window.end)
        )));
    }
    let max_depth = depths.last().copied().unwrap_or(0.0);
    Ok(ReefDataset {
        name: name.to_string(),
        t_scale_obs: temp_range(&hourly),
        hourly_obs: hourly,
        raw_obs: raw,
        sst,
        z_max: max_depth.max(Z_MAX_FLOOR).ceil(),
        window,
        depths,
        tz_offset_hours,
    })
}

pub(crate) fn distinct_depths(obs: &[Observation]) -> Vec<f64> {
    let mut d: Vec<f64> = obs.iter().map(|o| o.depth).collect();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

fn temp_range(obs: &[Observation]) -> f64 {
    let (lo, hi) = obs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| (lo.min(o.temp), hi.max(o.temp)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}
