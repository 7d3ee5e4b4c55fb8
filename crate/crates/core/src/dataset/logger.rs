use std::collections::BTreeMap;
use std::io::Write;

use super::Observation;
use crate::time::{format_instant, hour_floor, parse_instant};
use crate::{Error, Result};

/// Hard sanity bounds applied on top of provider QC flags, °C.
pub const TEMP_MIN: f64 = -5.0;
pub const TEMP_MAX: f64 = 50.0;

const AIMS_WEATHER_COLUMNS: usize = 30;
const AIMS_LOGGER_COLUMNS: usize = 19;

const TIME_NAMES: &[&str] = &["time", "sample_time", "timestamp", "datetime", "date_time"];
const TEMP_NAMES: &[&str] = &["temp_c", "qc_val", "temperature", "cal_val", "raw_value", "value"];
const DEPTH_NAMES: &[&str] = &["depth_m", "depth", "sensor_depth", "nominal_depth"];
const QC_NAMES: &[&str] = &["qc", "qc_flag", "flag"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    /// (1-based data row, reason) for every skipped row.
    pub malformed: Vec<(usize, String)>,
    pub qc_failed: usize,
}

impl ParseReport {
    pub fn malformed_count(&self) -> usize {
        self.malformed.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLogger {
    pub observations: Vec<Observation>,
    pub report: ParseReport,
}

#[derive(Debug, Clone, Copy)]
struct ColumnMap {
    time: usize,
    temp: usize,
    depth: Option<usize>,
    qc: Option<usize>,
}

/// Extracts the depth from an `@<number>m` filename tag, e.g. `davies@5m.csv`.
pub fn depth_from_filename(filename: &str) -> Option<f64> {
    let name = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    name.match_indices('@').find_map(|(i, _)| {
        let rest = &name[i + 1..];
        let end = rest.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(rest.len());
        if end == 0 || !rest[end..].starts_with('m') {
            return None;
        }
        rest[..end].parse::<f64>().ok().filter(|d| d.is_finite() && *d >= 0.0)
    })
}

fn find_column(headers: &[String], names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| headers.iter().position(|h| h == n))
}

fn column_map(headers: &[String]) -> Result<ColumnMap> {
    let n = headers.len();
    let canonical = match n {
        4 => headers == ["time", "depth_m", "temp_c", "qc"],
        3 => headers == ["time", "temp_c", "qc"],
        _ => false,
    };
    if !(canonical || n == AIMS_WEATHER_COLUMNS || n == AIMS_LOGGER_COLUMNS) {
        return Err(Error::UnknownSchema { columns: n });
    }
    let time = find_column(headers, TIME_NAMES);
    let temp = find_column(headers, TEMP_NAMES);
    match (time, temp) {
        (Some(time), Some(temp)) => Ok(ColumnMap {
            time,
            temp,
            depth: find_column(headers, DEPTH_NAMES),
            qc: find_column(headers, QC_NAMES),
        }),
        _ => Err(Error::UnknownSchema { columns: n }),
    }
}

fn qc_flag_passes(flag: &str) -> bool {
    matches!(
        flag.trim().to_ascii_lowercase().as_str(),
        "" | "pass" | "1" | "good" | "true" | "ok"
    )
}

/// Parses one logger file.
///
/// Accepts the canonical `time,depth_m,temp_c,qc` table, the depth-less
/// `time,temp_c,qc` variant, and the 30-/19-column AIMS exports (mapped by
/// header name). Rows that cannot be parsed are skipped and listed in the
/// report; rows that parse but fail the provider flag or the temperature
/// bounds are kept with `qc_pass = false`.
pub fn parse_logger_file(bytes: &[u8], filename: &str) -> Result<ParsedLogger> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let cols = column_map(&headers)?;
    let file_depth = depth_from_filename(filename);
    if cols.depth.is_none() && file_depth.is_none() {
        return Err(Error::MissingDepth { filename: filename.to_string() });
    }

    let mut observations = Vec::new();
    let mut report = ParseReport::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push((row, e.to_string()));
                continue;
            }
        };
        if record.len() != headers.len() {
            report
                .malformed
                .push((row, format!("expected {} fields, got {}", headers.len(), record.len())));
            continue;
        }
        let time = match parse_instant(&record[cols.time]) {
            Ok(t) => t,
            Err(e) => {
                report.malformed.push((row, e.to_string()));
                continue;
            }
        };
        let temp = match record[cols.temp].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                report.malformed.push((row, format!("bad temperature `{}`", &record[cols.temp])));
                continue;
            }
        };
        let depth = match cols.depth {
            Some(c) if !record[c].is_empty() => match record[c].parse::<f64>() {
                Ok(d) if d.is_finite() && d >= 0.0 => d + 0.0,
                _ => {
                    report.malformed.push((row, format!("bad depth `{}`", &record[c])));
                    continue;
                }
            },
            _ => match file_depth {
                Some(d) => d,
                None => {
                    report.malformed.push((row, "empty depth".into()));
                    continue;
                }
            },
        };
        let flag_ok = cols.qc.map_or(true, |c| qc_flag_passes(&record[c]));
        let qc_pass = flag_ok && (TEMP_MIN..=TEMP_MAX).contains(&temp);
        if !qc_pass {
            report.qc_failed += 1;
        }
        observations.push(Observation { time, depth, temp, qc_pass });
    }
    Ok(ParsedLogger { observations, report })
}

/// Hourly means per (depth, UTC hour); the timestamp is the bucket start.
///
/// QC-failed records are ignored. Output is ordered by depth, then time.
pub fn aggregate_hourly(obs: &[Observation]) -> Vec<Observation> {
    let mut buckets: BTreeMap<(u64, i64), (f64, usize)> = BTreeMap::new();
    for o in obs.iter().filter(|o| o.qc_pass) {
        // Non-negative floats order like their bit patterns.
        let key = ((o.depth + 0.0).to_bits(), hour_floor(o.time));
        let e = buckets.entry(key).or_insert((0.0, 0));
        e.0 += o.temp;
        e.1 += 1;
    }
    buckets
        .into_iter()
        .map(|((depth, time), (sum, n))| Observation {
            time,
            depth: f64::from_bits(depth),
            temp: sum / n as f64,
            qc_pass: true,
        })
        .collect()
}

/// Writes observations as a canonical logger table.
///
/// Temperatures and depths use the shortest round-trip decimal form, so
/// re-parsing reproduces them bit for bit.
pub fn write_canonical_logger<W: Write>(out: W, obs: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "depth_m", "temp_c", "qc"])?;
    for o in obs {
        w.write_record([
            format_instant(o.time),
            o.depth.to_string(),
            o.temp.to_string(),
            if o.qc_pass { "pass" } else { "fail" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn filename_depth() {
        assert_eq!(depth_from_filename("davies@5m.csv"), Some(5.0));
        assert_eq!(depth_from_filename("dir/rib_reef@9.1m_2020.csv"), Some(9.1));
        assert_eq!(depth_from_filename("foo@m.csv"), None);
        assert_eq!(depth_from_filename("foo.csv"), None);
    }

    #[test]
    fn depthless_canonical_takes_filename_depth() {
        let text = "time,temp_c,qc\n2020-01-01T00:00:00Z,27.3,pass\n2020-01-01T00:10:00Z,27.4,pass\n";
        let p = parse_logger_file(text.as_bytes(), "davies@5m.csv").unwrap();
        assert_eq!(p.observations.len(), 2);
        assert!(p.observations.iter().all(|o| o.depth == 5.0));
    }

    #[test]
    fn canonical_row_passes_through() {
        let text = "time,depth_m,temp_c,qc\n2020-01-01T00:00:00Z,5.0,27.3,pass\n";
        let p = parse_logger_file(text.as_bytes(), "x.csv").unwrap();
        assert_eq!(
            p.observations,
            vec![Observation { time: 1_577_836_800, depth: 5.0, temp: 27.3, qc_pass: true }]
        );
    }

    #[test]
    fn twelve_columns_is_unknown() {
        let header = (0..12).map(|i| format!("c{i}")).collect::<Vec<_>>().join(",");
        let err = parse_logger_file(format!("{header}\n").as_bytes(), "x@5m.csv").unwrap_err();
        assert!(matches!(err, Error::UnknownSchema { columns: 12 }));
    }

    #[test]
    fn missing_depth() {
        let text = "time,temp_c,qc\n2020-01-01T00:00:00Z,27.3,pass\n";
        assert!(matches!(
            parse_logger_file(text.as_bytes(), "nodepth.csv"),
            Err(Error::MissingDepth { .. })
        ));
    }

    #[test]
    fn malformed_rows_are_skipped_and_counted() {
        let text = "time,depth_m,temp_c,qc\n\
                    2020-01-01T00:00:00Z,5,27.3,pass\n\
                    not-a-time,5,27.3,pass\n\
                    2020-01-01T00:20:00Z,5,warm,pass\n\
                    2020-01-01T00:30:00Z,5,27.1,fail\n\
                    2020-01-01T00:40:00Z,5,60.0,pass\n";
        let p = parse_logger_file(text.as_bytes(), "x.csv").unwrap();
        assert_eq!(p.observations.len(), 3);
        assert_eq!(p.report.malformed_count(), 2);
        assert_eq!(p.report.malformed[0].0, 2);
        assert_eq!(p.report.qc_failed, 2);
        assert!(!p.observations[1].qc_pass);
        assert!(!p.observations[2].qc_pass);
    }

    #[test]
    fn aims_logger_columns_map_by_name() {
        let mut names: Vec<String> = (0..19).map(|i| format!("extra{i}")).collect();
        names[2] = "time".into();
        names[7] = "depth".into();
        names[12] = "qc_val".into();
        names[13] = "qc_flag".into();
        let mut row = vec!["x".to_string(); 19];
        row[2] = "2020-01-01 00:00:00".into();
        row[7] = "6.2".into();
        row[12] = "26.9".into();
        row[13] = "1".into();
        let mut bad = row.clone();
        bad[13] = "4".into();
        let text = format!("{}\n{}\n{}\n", names.join(","), row.join(","), bad.join(","));
        let p = parse_logger_file(text.as_bytes(), "aims.csv").unwrap();
        assert_eq!(p.observations.len(), 2);
        assert_eq!(p.observations[0].depth, 6.2);
        assert_eq!(p.observations[0].temp, 26.9);
        assert!(p.observations[0].qc_pass);
        assert!(!p.observations[1].qc_pass);
    }

    fn obs(t: i64, d: f64, v: f64) -> Observation {
        Observation { time: t, depth: d, temp: v, qc_pass: true }
    }

    #[test]
    fn hourly_mean_of_two() {
        let h = aggregate_hourly(&[obs(3600 * 10 + 60, 5.0, 27.0), obs(3600 * 10 + 1800, 5.0, 28.0)]);
        assert_eq!(h, vec![obs(36_000, 5.0, 27.5)]);
    }

    #[test]
    fn hourly_keeps_depths_apart() {
        let h = aggregate_hourly(&[obs(36_060, 5.0, 27.0), obs(36_060, 9.0, 26.0)]);
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].depth, h[1].depth), (5.0, 9.0));
    }

    #[test]
    fn hourly_single_reading() {
        assert_eq!(aggregate_hourly(&[obs(36_061, 5.0, 27.3)]), vec![obs(36_000, 5.0, 27.3)]);
        assert!(aggregate_hourly(&[]).is_empty());
    }

    fn arb_obs() -> impl Strategy<Value = Vec<Observation>> {
        prop::collection::vec(
            (0i64..200_000, prop::sample::select(vec![0.5, 3.0, 5.0, 10.0]), 20.0f64..32.0, any::<bool>()),
            0..200,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(t, d, temp, qc)| Observation { time: 1_600_000_000 + t, depth: d, temp, qc_pass: qc })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn aggregation_is_idempotent(o in arb_obs()) {
            let once = aggregate_hourly(&o);
            prop_assert_eq!(aggregate_hourly(&once), once.clone());
            prop_assert!(once.iter().all(|x| x.time % 3600 == 0));
        }

        #[test]
        fn canonical_round_trip_is_bit_exact(o in arb_obs()) {
            let mut buf = Vec::new();
            write_canonical_logger(&mut buf, &o).unwrap();
            let back = parse_logger_file(&buf, "rt.csv").unwrap();
            prop_assert_eq!(back.report.malformed_count(), 0);
            prop_assert_eq!(back.observations.len(), o.len());
            for (a, b) in back.observations.iter().zip(&o) {
                prop_assert_eq!(a.time, b.time);
                prop_assert_eq!(a.depth.to_bits(), b.depth.to_bits());
                prop_assert_eq!(a.temp.to_bits(), b.temp.to_bits());
                prop_assert_eq!(a.qc_pass, b.qc_pass);
            }
        }
    }
}
