//! The `timestamp,sensor_id,value` readings file.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

pub const READINGS_HEADER: &str = "timestamp,sensor_id,value";

/// Parses readings text. `origin` only labels diagnostics.
///
/// Each sensor's records must be contiguous and strictly time-ascending with a
/// constant spacing, which becomes the series' sampling interval (1 s for a
/// single-sample series).
pub fn parse_readings(text: &str, origin: &Path) -> Result<Vec<TimeSeries>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == READINGS_HEADER => {}
        Some((_, other)) => {
            return Err(Error::parse(
                origin,
                1,
                format!("expected header `{READINGS_HEADER}`, found `{}`", other.trim()),
            ))
        }
        None => return Err(Error::parse(origin, 1, "empty readings file")),
    }

    struct Building {
        id: String,
        timestamps: Vec<i64>,
        values: Vec<f64>,
        first_line: usize,
    }

    let mut done: Vec<Building> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut current: Option<Building> = None;

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(id), Some(val), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(origin, line_no, "expected 3 comma-separated fields"));
        };
        let ts: i64 = ts
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad timestamp `{ts}`")))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(origin, line_no, "empty sensor id"));
        }
        let value: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad value `{val}`")))?;
        if !value.is_finite() {
            return Err(Error::parse(origin, line_no, "non-finite value"));
        }

        let switch = current.as_ref().is_none_or(|b| b.id != id);
        if switch {
            if seen.contains(id) {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("records for sensor `{id}` are not contiguous"),
                ));
            }
            seen.insert(id.to_string());
            if let Some(b) = current.take() {
                done.push(b);
            }
            current = Some(Building {
                id: id.to_string(),
                timestamps: Vec::new(),
                values: Vec::new(),
                first_line: line_no,
            });
        }
        let b = current.as_mut().expect("current sensor set above");
        if let Some(&prev) = b.timestamps.last() {
            if ts <= prev {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("timestamp {ts} for `{id}` is not after {prev}"),
                ));
            }
            if b.timestamps.len() >= 2 {
                let step = b.timestamps[1] - b.timestamps[0];
                if ts - prev != step {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("non-uniform sampling for `{id}`: step {} after {step}", ts - prev),
                    ));
                }
            }
        }
        b.timestamps.push(ts);
        b.values.push(value);
    }
    if let Some(b) = current.take() {
        done.push(b);
    }

    done.into_iter()
        .map(|b| {
            let interval = if b.timestamps.len() >= 2 {
                (b.timestamps[1] - b.timestamps[0]) as f64
            } else {
                1.0
            };
            TimeSeries::new(b.id, interval, b.timestamps[0], b.values)
                .map_err(|e| Error::parse(origin, b.first_line, e.to_string()))
        })
        .collect()
}

pub fn read_readings(path: &Path) -> Result<Vec<TimeSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_readings(&text, path)
}

/// Renders series in file order. Values use the shortest exact decimal form.
pub fn format_readings(series: &[TimeSeries]) -> String {
    let mut out = String::with_capacity(series.iter().map(|s| s.len() * 24).sum::<usize>() + 32);
    out.push_str(READINGS_HEADER);
    out.push('\n');
    for s in series {
        let step = s.sampling_interval.round() as i64;
        for (i, v) in s.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", s.start_time + i as i64 * step, s.sensor_id, v);
        }
    }
    out
}

pub fn write_readings(path: &Path, series: &[TimeSeries]) -> Result<()> {
    std::fs::write(path, format_readings(series)).map_err(|e| Error::io(path, e))
}
