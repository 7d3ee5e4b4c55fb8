//! Maximum of monthly means, bleaching threshold, degree heating days and
//! matched-window depth profiles.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::dataset::{ReefDataset, SstSeries};
use crate::time::{format_instant, to_datetime, Timestamp, DAY, HOUR, SECONDS_PER_DAY};
use crate::{DepthPredictor, Error, Result};

/// Longest interval a single sample is held for, s.
pub const MAX_HOLD: i64 = DAY;

/// Mean per calendar month over all years, then the largest of the 12.
pub fn compute_mmm(sst: &SstSeries) -> Result<f64> {
    let mut months: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (&t, &v) in sst.times().iter().zip(sst.values()) {
        let e = months.entry(to_datetime(t).month()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    if months.len() < 12 {
        return Err(Error::InsufficientMonths { found: months.len() });
    }
    Ok(months.values().map(|(s, n)| s / *n as f64).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleachingThreshold {
    pub mmm: f64,
    pub threshold: f64,
}

impl BleachingThreshold {
    pub fn from_mmm(mmm: f64) -> Self {
        Self { mmm, threshold: mmm + 1.0 }
    }

    pub fn from_sst(sst: &SstSeries) -> Result<Self> {
        Ok(Self::from_mmm(compute_mmm(sst)?))
    }
}

/// Degree heating days, °C·days, of a time-ordered series over the closed
/// window `[start, end]`.
///
/// Each sample's exceedance is held from its time until the next sample,
/// for at most [`MAX_HOLD`]; only the part of that interval inside the
/// window counts. The last sample carries no interval.
pub fn dhd(series: &[(Timestamp, f64)], threshold: f64, start: Timestamp, end: Timestamp) -> Result<f64> {
    if series.is_empty() || end < start {
        return Err(Error::EmptyWindow);
    }
    let mut total = 0.0;
    for w in series.windows(2) {
        let ((t0, v), (t1, _)) = (w[0], w[1]);
        if t1 < t0 {
            return Err(Error::Invalid("DHD series must be time-ordered".into()));
        }
        let excess = v - threshold;
        if excess <= 0.0 {
            continue;
        }
        let (a, b) = (t0.max(start), t1.min(t0 + MAX_HOLD).min(end));
        if b > a {
            total += excess * (b - a) as f64 / SECONDS_PER_DAY;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthDhd {
    pub depth: f64,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub dhd_logger: f64,
    pub dhd_model: f64,
    pub dhd_satellite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhdProfile {
    pub threshold: BleachingThreshold,
    pub rows: Vec<DepthDhd>,
}

/// Hourly instants from `start` through `end`.
fn hourly(start: Timestamp, end: Timestamp) -> impl Iterator<Item = Timestamp> {
    (0..).map(move |k| start + k * HOUR).take_while(move |&t| t <= end)
}

/// Daily SST samples covering `[start, end]`, starting at the knot at or
/// before `start`.
fn daily_sst(sst: &SstSeries, start: Timestamp, end: Timestamp) -> Vec<(Timestamp, f64)> {
    let times = sst.times();
    let first = times.partition_point(|&t| t <= start).saturating_sub(1);
    times[first..]
        .iter()
        .zip(&sst.values()[first..])
        .take_while(|(&t, _)| t <= end)
        .map(|(&t, &v)| (t, v))
        .collect()
}

/// Logger, model and satellite DHD over the same per-depth window: the
/// deployment span of the raw logger record at that depth.
pub fn matched_profile(
    ds: &ReefDataset,
    model: &dyn DepthPredictor,
    threshold: BleachingThreshold,
) -> Result<DhdProfile> {
    let mut rows = Vec::with_capacity(ds.depths.len());
    for &d in &ds.depths {
        let mut raw: Vec<(Timestamp, f64)> =
            ds.raw_at(d).into_iter().filter(|o| o.qc_pass).map(|o| (o.time, o.temp)).collect();
        raw.sort_by_key(|r| r.0);
        let (Some(&(start, _)), Some(&(end, _))) = (raw.first(), raw.last()) else {
            return Err(Error::InsufficientData(format!("no logger record at {d} m")));
        };
        let th = threshold.threshold;
        let hours: Vec<Timestamp> = hourly(start, end).collect();
        let points: Vec<(f64, f64)> = hours.iter().map(|&t| (d, t as f64)).collect();
        let preds = model.predict_many(&points)?;
        let modelled: Vec<(Timestamp, f64)> = hours.into_iter().zip(preds).collect();
        rows.push(DepthDhd {
            depth: d,
            window_start: start,
            window_end: end,
            dhd_logger: dhd(&raw, th, start, end)?,
            dhd_model: dhd(&modelled, th, start, end)?,
            dhd_satellite: dhd(&daily_sst(&ds.sst, start, end), th, start, end)?,
        });
    }
    Ok(DhdProfile { threshold, rows })
}

pub fn write_profile_csv<W: Write>(out: W, profile: &DhdProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["depth_m", "window_start", "window_end", "dhd_logger", "dhd_model", "dhd_satellite"])?;
    for r in &profile.rows {
        w.write_record([
            r.depth.to_string(),
            format_instant(r.window_start),
            format_instant(r.window_end),
            r.dhd_logger.to_string(),
            r.dhd_model.to_string(),
            r.dhd_satellite.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
