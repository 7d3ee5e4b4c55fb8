use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_dataset, load_sst, parse_logger_file, write_canonical_logger, write_sst, Observation,
    ReefDataset, Window,
};
use crate::time::{format_instant, parse_instant};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// `manifest.toml` at the root of a dataset bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub reef: String,
    pub window_start: String,
    pub window_end: String,
    #[serde(default = "default_tz")]
    pub tz_offset_hours: f64,
    #[serde(default = "default_sst_file")]
    pub sst_file: String,
    /// Logger files relative to the bundle; every other `.csv` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loggers: Option<Vec<String>>,
}

fn default_tz() -> f64 {
    10.0
}

fn default_sst_file() -> String {
    "sst.csv".into()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub file: String,
    pub rows: usize,
    pub qc_failed: usize,
    pub malformed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleReport {
    pub reef: String,
    pub files: Vec<FileReport>,
    pub depths: Vec<f64>,
    pub hourly_records: usize,
    pub raw_records: usize,
    pub z_max: f64,
    pub sst_days: usize,
}

/// Loads a bundle directory; `manifest` overrides `<dir>/manifest.toml`.
pub fn load_bundle(dir: &Path, manifest: Option<&Path>) -> Result<(ReefDataset, BundleReport)> {
    let manifest_path = manifest.map(Path::to_path_buf).unwrap_or_else(|| dir.join(MANIFEST_FILE));
    let m: BundleManifest = toml::from_str(&fs::read_to_string(&manifest_path)?)?;
    let window = Window::new(parse_instant(&m.window_start)?, parse_instant(&m.window_end)?)?;
    let sst = load_sst(&fs::read(dir.join(&m.sst_file))?)?;

    let files = match &m.loggers {
        Some(list) => list.clone(),
        None => {
            let mut v: Vec<String> = fs::read_dir(dir)?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".csv") && *n != m.sst_file)
                .collect();
            v.sort();
            v
        }
    };
    if files.is_empty() {
        return Err(Error::InsufficientData("bundle has no logger files".into()));
    }
    let mut all: Vec<Observation> = Vec::new();
    let mut reports = Vec::new();
    for f in &files {
        let parsed = parse_logger_file(&fs::read(dir.join(f))?, f)?;
        reports.push(FileReport {
            file: f.clone(),
            rows: parsed.observations.len(),
            qc_failed: parsed.report.qc_failed,
            malformed: parsed.report.malformed_count(),
        });
        all.extend(parsed.observations);
    }
    let sst_days = sst.len();
    let ds = build_dataset(&m.reef, &all, sst, window, m.tz_offset_hours)?;
    let report = BundleReport {
        reef: m.reef.clone(),
        files: reports,
        depths: ds.depths.clone(),
        hourly_records: ds.hourly_obs.len(),
        raw_records: ds.raw_obs.len(),
        z_max: ds.z_max,
        sst_days,
    };
    Ok((ds, report))
}

/// Writes `ds` as a bundle: one canonical logger file per depth (native
/// cadence records), the SST table and a manifest.
pub fn write_bundle(ds: &ReefDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut loggers = Vec::new();
    for &d in &ds.depths {
        let name = format!("{}@{}m.csv", ds.name, d);
        let obs = ds.raw_at(d);
        let obs = if obs.is_empty() { ds.hourly_at(d) } else { obs };
        write_canonical_logger(fs::File::create(dir.join(&name))?, &obs)?;
        loggers.push(name);
    }
    write_sst(fs::File::create(dir.join("sst.csv"))?, &ds.sst)?;
    let m = BundleManifest {
        reef: ds.name.clone(),
        window_start: format_instant(ds.window.start),
        window_end: format_instant(ds.window.end),
        tz_offset_hours: ds.tz_offset_hours,
        sst_file: "sst.csv".into(),
        loggers: Some(loggers),
    };
    let text = toml::to_string(&m).map_err(|e| Error::Invalid(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}
