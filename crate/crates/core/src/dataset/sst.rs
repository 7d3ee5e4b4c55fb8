use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{TEMP_MAX, TEMP_MIN};
use crate::time::{format_date, parse_date, Timestamp, DAY};
use crate::{Error, Result};

/// Longest run of missing days that is filled by interpolation.
pub const MAX_FILL_DAYS: i64 = 7;

/// Daily surface temperature, strictly increasing times (midnight UTC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SstSeries {
    times: Vec<Timestamp>,
    values: Vec<f64>,
}

impl SstSeries {
    pub fn new(times: Vec<Timestamp>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        if times.len() != values.len() {
            return Err(Error::LengthMismatch { left: times.len(), right: values.len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("SST times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("SST values must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[Timestamp] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> Timestamp {
        self.times[0]
    }

    pub fn end(&self) -> Timestamp {
        *self.times.last().expect("non-empty")
    }

    pub fn covers(&self, start: Timestamp, end: Timestamp) -> bool {
        self.start() <= start && self.end() >= end
    }

    fn segment(&self, t: f64) -> Result<usize> {
        let (t0, t1) = (self.start() as f64, self.end() as f64);
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfDomain(format!("time {t} outside SST coverage [{t0}, {t1}]")));
        }
        if self.times.len() == 1 {
            return Ok(0);
        }
        let i = self.times.partition_point(|&x| (x as f64) <= t);
        Ok(i.saturating_sub(1).min(self.times.len() - 2))
    }

    /// Piecewise-linear value at `t` (seconds since epoch).
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let i = self.segment(t)?;
        if self.times.len() == 1 {
            return Ok(self.values[0]);
        }
        let (ta, tb) = (self.times[i] as f64, self.times[i + 1] as f64);
        let (va, vb) = (self.values[i], self.values[i + 1]);
        if t == ta {
            return Ok(va);
        }
        if t == tb {
            return Ok(vb);
        }
        Ok(va + (vb - va) * (t - ta) / (tb - ta))
    }

    /// Slope of the linear segment containing `t`, °C/s. At an interior knot
    /// the segment to the right is used.
    pub fn slope_at(&self, t: f64) -> Result<f64> {
        let i = self.segment(t)?;
        if self.times.len() == 1 {
            return Ok(0.0);
        }
        let (ta, tb) = (self.times[i] as f64, self.times[i + 1] as f64);
        Ok((self.values[i + 1] - self.values[i]) / (tb - ta))
    }
}

/// Reads a `date,sst_c` table into a gap-filled daily series.
///
/// Duplicate dates keep the last row. Runs of up to [`MAX_FILL_DAYS`]
/// missing days are filled linearly; longer runs are an error. Rows with
/// unparseable or out-of-range values count as missing.
pub fn load_sst(bytes: &[u8]) -> Result<SstSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut by_day: BTreeMap<Timestamp, f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::MalformedRow { row: i + 1, reason: "expected date,sst_c".into() });
        }
        let day = parse_date(&record[0])
            .map_err(|e| Error::MalformedRow { row: i + 1, reason: e.to_string() })?;
        match record[1].parse::<f64>() {
            Ok(v) if v.is_finite() && (TEMP_MIN..=TEMP_MAX).contains(&v) => {
                by_day.insert(day, v);
            }
            _ => {
                by_day.remove(&day);
            }
        }
    }
    if by_day.is_empty() {
        return Err(Error::EmptySeries);
    }
    let known: Vec<(Timestamp, f64)> = by_day.into_iter().collect();
    let mut times = vec![known[0].0];
    let mut values = vec![known[0].1];
    for w in known.windows(2) {
        let ((ta, va), (tb, vb)) = (w[0], w[1]);
        let missing = (tb - ta) / DAY - 1;
        if missing > MAX_FILL_DAYS {
            return Err(Error::GapTooLong { after: format_date(ta), missing_days: missing });
        }
        for k in 1..=missing {
            let frac = k as f64 / (missing + 1) as f64;
            times.push(ta + k * DAY);
            values.push(va + (vb - va) * frac);
        }
        times.push(tb);
        values.push(vb);
    }
    SstSeries::new(times, values)
}

pub fn write_sst<W: Write>(out: W, sst: &SstSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "sst_c"])?;
    for (&t, &v) in sst.times.iter().zip(&sst.values) {
        w.write_record([format_date(t), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
