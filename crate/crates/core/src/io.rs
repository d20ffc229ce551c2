//! CSV ingestion, number formatting and flat key/value config files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::PairedSeries;

/// 17 significant digits: lossless for binary64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Reads the `x` and `y` columns of a CSV file without range checks on `y`.
///
/// Lines starting with `#` are comments; other columns are ignored; LF and
/// CRLF endings are both accepted. Non-finite or unparsable cells are
/// rejected with their line number.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<u64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let header_line = rdr.position().line();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: header_line.max(1),
            column: name.into(),
            reason: format!("header has no '{name}' column"),
        })
    };
    let (ix, iy) = (col("x")?, col("y")?);

    let (mut xs, mut ys, mut lines) = (Vec::new(), Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).ok_or_else(|| Error::Parse {
                line,
                column: name.into(),
                reason: "missing field".into(),
            })?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                column: name.into(),
                reason: format!("not a number: '{raw}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: name.into(),
                    reason: format!("non-finite value '{raw}'"),
                });
            }
            Ok(v)
        };
        xs.push(cell(ix, "x")?);
        ys.push(cell(iy, "y")?);
        lines.push(line);
    }
    if xs.is_empty() {
        return Err(Error::InvariantViolation {
            line: header_line.max(1),
            reason: "file contains no data rows".into(),
        });
    }
    Ok((xs, ys, lines))
}

/// Reads an `x,y` CSV into a [`PairedSeries`], requiring `y > 0`.
pub fn ingest_csv(path: &Path) -> Result<PairedSeries> {
    let (x, y, lines) = read_xy(path)?;
    if let Some(j) = y.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvariantViolation {
            line: lines[j],
            reason: format!("response must be positive, got {}", y[j]),
        });
    }
    PairedSeries::new(x, y)
}

/// Writes an `x,y` CSV with `# ` comment preamble.
pub fn write_series(path: &Path, series: &PairedSeries, preamble: &[String]) -> Result<()> {
    let mut out = String::new();
    for line in preamble {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("x,y\n");
    for (x, y) in series.x().iter().zip(series.y()) {
        out.push_str(&fmt_f64(*x));
        out.push(',');
        out.push_str(&fmt_f64(*y));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            column: "key".into(),
            reason: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                column: "key".into(),
                reason: "empty key".into(),
            });
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path)?)
}
