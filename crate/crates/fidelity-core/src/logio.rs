//! Drive-log text format.
//!
//! A log is UTF-8 text: `# key=value` metadata lines, then the fixed column
//! header, then one CSV row per sample. `yaw_rate` and `lat_accel` cells may
//! be empty in raw captures; everything else is required. Example:
//!
//! ```text
//! # driver_id=D3
//! # environment=STD
//! # task=SLX
//! # sample_rate=100
//! t,x,y,heading,speed,yaw_rate,lat_accel,swa
//! 0,0,0,0,12.5,,,0.01
//! 0.01,0.125,0,0.0001,12.5,0.01,0.125,0.012
//! ```
//!
//! Numbers are written with `f64`'s shortest round-trip formatting, so a
//! parse -> write cycle is lossless and writing the same data twice is
//! byte-identical. Parse errors carry the 1-based physical line number.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::trajectory::{DriveLog, Environment, LogMeta, Task, TrajectorySample};

pub const HEADER: &str = "t,x,y,heading,speed,yaw_rate,lat_accel,swa";

const REQUIRED_META: [&str; 4] = ["driver_id", "environment", "task", "sample_rate"];

fn parse_f64(s: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {field} value '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite {field} value '{s}'")));
    }
    Ok(v)
}

fn parse_opt_f64(s: &str, line: usize, field: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line, field).map(Some)
    }
}

/// Parse a drive log from text. See the module docs for the format.
pub fn parse_drive_log(text: &str) -> Result<DriveLog> {
    let mut meta_pairs: BTreeMap<String, String> = BTreeMap::new();
    let mut lines = text.lines().enumerate();

    // metadata lines, then the column header
    let header_line;
    loop {
        let (idx, raw) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing column header".to_string()))?;
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix('#') {
            let body = rest.trim();
            let (k, v) = body.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("metadata line without '=': '{line}'"))
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty metadata key".to_string()));
            }
            if meta_pairs.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::parse(line_no, format!("duplicate metadata key '{key}'")));
            }
        } else if line.trim() == HEADER {
            header_line = line_no;
            break;
        } else {
            return Err(Error::parse(
                line_no,
                format!("expected metadata or column header, got '{line}'"),
            ));
        }
    }

    for key in REQUIRED_META {
        if !meta_pairs.contains_key(key) {
            return Err(Error::parse(
                header_line,
                format!("missing metadata key '{key}'"),
            ));
        }
    }

    let environment = {
        let v = &meta_pairs["environment"];
        Environment::parse(v)
            .ok_or_else(|| Error::parse(header_line, format!("unknown environment '{v}'")))?
    };
    let task = {
        let v = &meta_pairs["task"];
        Task::parse(v).ok_or_else(|| Error::parse(header_line, format!("unknown task '{v}'")))?
    };
    let sample_rate = parse_f64(&meta_pairs["sample_rate"], header_line, "sample_rate")?;
    let realism_rating = match meta_pairs.get("realism_rating") {
        Some(v) => {
            let r = parse_f64(v, header_line, "realism_rating")?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::parse(
                    header_line,
                    format!("realism_rating {r} outside [0, 1]"),
                ));
            }
            Some(r)
        }
        None => None,
    };
    let driver_id = meta_pairs["driver_id"].clone();
    let extras: BTreeMap<String, String> = meta_pairs
        .into_iter()
        .filter(|(k, _)| !REQUIRED_META.contains(&k.as_str()) && k != "realism_rating")
        .collect();

    let mut samples = Vec::new();
    let mut prev_t: Option<f64> = None;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() && idx + 1 == text.lines().count() {
            break; // tolerate a trailing blank line only
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(Error::parse(
                line_no,
                format!("expected 8 columns, got {}", cells.len()),
            ));
        }
        let s = TrajectorySample {
            t: parse_f64(cells[0], line_no, "t")?,
            x: parse_f64(cells[1], line_no, "x")?,
            y: parse_f64(cells[2], line_no, "y")?,
            heading: parse_f64(cells[3], line_no, "heading")?,
            speed: parse_f64(cells[4], line_no, "speed")?,
            yaw_rate: parse_opt_f64(cells[5], line_no, "yaw_rate")?,
            lat_accel: parse_opt_f64(cells[6], line_no, "lat_accel")?,
            swa: parse_f64(cells[7], line_no, "swa")?,
            sw_rate: None,
        };
        if s.speed < 0.0 {
            return Err(Error::parse(line_no, format!("negative speed {}", s.speed)));
        }
        if let Some(p) = prev_t {
            if s.t <= p {
                return Err(Error::parse(line_no, "non-monotonic time".to_string()));
            }
        }
        prev_t = Some(s.t);
        samples.push(s);
    }

    let meta = LogMeta { driver_id, environment, task, sample_rate, realism_rating, extras };
    DriveLog::new(meta, samples)
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Render a log in the format accepted by [`parse_drive_log`]. The in-memory
/// `sw_rate` field is not part of the file format; it is re-derived on load.
pub fn write_drive_log(log: &DriveLog) -> String {
    let m = &log.meta;
    let mut out = String::new();
    out.push_str(&format!("# driver_id={}\n", m.driver_id));
    out.push_str(&format!("# environment={}\n", m.environment));
    out.push_str(&format!("# task={}\n", m.task));
    out.push_str(&format!("# sample_rate={}\n", fmt(m.sample_rate)));
    if let Some(r) = m.realism_rating {
        out.push_str(&format!("# realism_rating={}\n", fmt(r)));
    }
    for (k, v) in &m.extras {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(HEADER);
    out.push('\n');
    for s in log.samples() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(s.t),
            fmt(s.x),
            fmt(s.y),
            fmt(s.heading),
            fmt(s.speed),
            fmt_opt(s.yaw_rate),
            fmt_opt(s.lat_accel),
            fmt(s.swa),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# driver_id=D3
# environment=STD
# task=SLX
# sample_rate=100
t,x,y,heading,speed,yaw_rate,lat_accel,swa
0,0,0,0,12.5,,,0.01
0.01,0.125,0,0.0001,12.5,0.01,0.125,0.012
";

    #[test]
    fn parses_minimal_log() {
        let log = parse_drive_log(GOOD).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.meta.driver_id, "D3");
        assert_eq!(log.meta.environment, Environment::Std);
        assert_eq!(log.meta.task, Task::Slx);
        assert_eq!(log.meta.sample_rate, 100.0);
        assert_eq!(log.samples()[0].yaw_rate, None);
        assert_eq!(log.samples()[1].yaw_rate, Some(0.01));
    }

    #[test]
    fn non_monotonic_time_names_physical_line() {
        let text = "\
# driver_id=D3
# environment=STD
# task=SLX
# sample_rate=100
t,x,y,heading,speed,yaw_rate,lat_accel,swa
0,0,0,0,12.5,,,0.01
0,0.1,0,0,12.5,,,0.01
";
        let err = parse_drive_log(text).unwrap_err();
        assert_eq!(err.to_string(), "non-monotonic time at line 7");
    }

    #[test]
    fn bad_float_and_missing_meta_are_rejected_with_lines() {
        let bad_float = GOOD.replace("0.012", "zz");
        let err = parse_drive_log(&bad_float).unwrap_err();
        assert_eq!(err.to_string(), "invalid swa value 'zz' at line 7");

        let missing = GOOD.replace("# task=SLX\n", "");
        let err = parse_drive_log(&missing).unwrap_err();
        assert!(err.to_string().contains("missing metadata key 'task'"));

        let env = GOOD.replace("STD", "SIM");
        let err = parse_drive_log(&env).unwrap_err();
        assert!(err.to_string().contains("unknown environment 'SIM'"));
    }

    #[test]
    fn rejects_nan_and_negative_speed() {
        let nan = GOOD.replace("0.125,0,0.0001,12.5", "NaN,0,0.0001,12.5");
        assert!(parse_drive_log(&nan).is_err());
        let neg = GOOD.replace(",12.5,0.01,", ",-1,0.01,");
        let err = parse_drive_log(&neg).unwrap_err();
        assert!(err.to_string().contains("negative speed"), "{err}");
    }

    #[test]
    fn write_then_parse_round_trips_exactly() {
        let log = parse_drive_log(GOOD).unwrap();
        let text = write_drive_log(&log);
        let log2 = parse_drive_log(&text).unwrap();
        assert_eq!(log, log2);
        // canonical form is a fixed point
        assert_eq!(text, write_drive_log(&log2));
    }

    #[test]
    fn extras_survive_a_round_trip() {
        let with_extra = GOOD.replace(
            "# sample_rate=100\n",
            "# sample_rate=100\n# attempt_index=3\n# anchor_method=PEAK_MIDPOINT\n",
        );
        let log = parse_drive_log(&with_extra).unwrap();
        assert_eq!(log.meta.extras["attempt_index"], "3");
        let text = write_drive_log(&log);
        let log2 = parse_drive_log(&text).unwrap();
        assert_eq!(log2.meta.extras["anchor_method"], "PEAK_MIDPOINT");
    }

    #[test]
    fn full_precision_floats_round_trip() {
        let mut log = parse_drive_log(GOOD).unwrap();
        // awkward values: many digits, tiny, large
        let mut s = log.samples()[1];
        s.x = 1.0 / 3.0;
        s.y = -2.718281828459045e-7;
        s.heading = 0.1 + 0.2;
        let meta = log.meta.clone();
        log = DriveLog::new(meta, vec![log.samples()[0], s]).unwrap();
        let text = write_drive_log(&log);
        let log2 = parse_drive_log(&text).unwrap();
        assert_eq!(log.samples()[1].x, log2.samples()[1].x);
        assert_eq!(log.samples()[1].y, log2.samples()[1].y);
        assert_eq!(log.samples()[1].heading, log2.samples()[1].heading);
    }
}
