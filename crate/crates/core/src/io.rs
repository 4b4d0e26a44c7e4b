//! Plain-text formats: `timestamp,value` series CSV, `lag,rho` correlogram
//! CSV and `key=value` metadata.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::series::{dedup_and_sort, CrossCorrelogram, IrregularSeries};

fn parse_row(line: &str) -> Option<(f64, f64)> {
    let mut cols = line.split(',').map(str::trim);
    let t = cols.next()?.parse::<f64>().ok()?;
    let v = cols.next()?.parse::<f64>().ok()?;
    if cols.next().is_some() {
        return None;
    }
    Some((t, v))
}

/// Read raw `(timestamp, value)` rows. A non-numeric first row is taken as
/// a header; any other unparsable row is an error naming its line.
pub fn read_raw_csv<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    let mut seen_first = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_start_matches('\u{feff}').trim();
        if line.is_empty() {
            continue;
        }
        match parse_row(line) {
            Some(row) => rows.push(row),
            None if !seen_first => {}
            None => {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected `timestamp,value`, got `{line}`"),
                })
            }
        }
        seen_first = true;
    }
    Ok(rows)
}

pub fn read_series_csv<R: BufRead>(label: &str, reader: R) -> Result<IrregularSeries> {
    let raw = read_raw_csv(reader)?;
    dedup_and_sort(label, &raw)
}

pub fn write_series_csv<W: Write>(mut w: W, s: &IrregularSeries) -> Result<()> {
    writeln!(w, "timestamp,value")?;
    for (t, v) in s.pairs() {
        writeln!(w, "{t},{v}")?;
    }
    Ok(())
}

pub fn write_correlogram_csv<W: Write>(mut w: W, c: &CrossCorrelogram) -> Result<()> {
    writeln!(w, "lag,rho")?;
    for (h, r) in c.iter() {
        writeln!(w, "{h},{r}")?;
    }
    Ok(())
}

/// `key=value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            reason: format!("expected `key=value`, got `{line}`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn write_key_values<W: Write>(mut w: W, pairs: &[(String, String)]) -> Result<()> {
    for (k, v) in pairs {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}
