//! UTC timestamps and the calendar phases the model is keyed to.

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};

use crate::{Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DAY: i64 = 86_400;
pub const HOUR: i64 = 3_600;
pub const DAYS_PER_YEAR: f64 = 365.25;

/// 2000-01-01T00:00:00Z, the origin of the annual phase.
const ANNUAL_ORIGIN: f64 = 946_684_800.0;

/// Parses `YYYY-MM-DDTHH:MM:SS[Z|±hh:mm]`, `YYYY-MM-DD HH:MM:SS` (taken as
/// UTC) or a bare date (midnight UTC).
pub fn parse_instant(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    parse_date(s)
}

/// Parses a calendar date as midnight UTC.
pub fn parse_date(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    let head = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(head, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
        .map_err(|e| Error::Invalid(format!("bad date `{s}`: {e}")))
}

pub fn format_instant(t: Timestamp) -> String {
    to_datetime(t).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn format_date(t: Timestamp) -> String {
    to_datetime(t).format("%Y-%m-%d").to_string()
}

pub fn to_datetime(t: Timestamp) -> DateTime<Utc> {
    DateTime::from_timestamp(t, 0).expect("timestamp in chrono range")
}

/// Local fractional hour in [0, 24): UTC hour-of-day shifted by a fixed
/// offset, no daylight saving.
pub fn local_hour(t: f64, tz_offset_hours: f64) -> f64 {
    (t / SECONDS_PER_HOUR + tz_offset_hours).rem_euclid(24.0)
}

/// Fractional day within a 365.25-day year, continuous in `t`.
///
/// Counted from 2000-01-01T00:00Z so it tracks day-of-year to within a day
/// while staying differentiable across year boundaries.
pub fn annual_phase_days(t: f64) -> f64 {
    ((t - ANNUAL_ORIGIN) / SECONDS_PER_DAY).rem_euclid(DAYS_PER_YEAR)
}

/// Start of the UTC hour containing `t`.
pub fn hour_floor(t: Timestamp) -> Timestamp {
    t.div_euclid(HOUR) * HOUR
}

/// Midnight UTC of the day containing `t`.
pub fn day_floor(t: Timestamp) -> Timestamp {
    t.div_euclid(DAY) * DAY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a = parse_instant("2020-01-01T00:00:00Z").unwrap();
        assert_eq!(a, 1_577_836_800);
        assert_eq!(parse_instant("2020-01-01 00:00:00").unwrap(), a);
        assert_eq!(parse_instant("2020-01-01").unwrap(), a);
        assert_eq!(parse_instant("2020-01-01T10:00:00+10:00").unwrap(), a);
        assert_eq!(format_instant(a), "2020-01-01T00:00:00Z");
        assert!(parse_instant("yesterday").is_err());
    }

    #[test]
    fn local_hour_wraps() {
        // 02:00 UTC is noon at +10.
        assert!((local_hour(2.0 * 3600.0, 10.0) - 12.0).abs() < 1e-12);
        assert!((local_hour(20.0 * 3600.0, 10.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn annual_phase_is_continuous_and_periodic() {
        let t = 1_600_000_000.0;
        let y = DAYS_PER_YEAR * SECONDS_PER_DAY;
        assert!((annual_phase_days(t) - annual_phase_days(t + y)).abs() < 1e-6);
        assert!(annual_phase_days(ANNUAL_ORIGIN).abs() < 1e-12);
    }
}
