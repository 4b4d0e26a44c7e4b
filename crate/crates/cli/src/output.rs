//! Where results go: a file or standard output, plus optional gnuplot
//! scripts that plot the written CSV.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use xcausal::io::read_raw_csv;
use xcausal::{CrossCorrelogram, LagGrid};

use crate::settings::{read_text, write_bytes, CliError, CliResult};

/// Write `body` to `out`, or to standard output when `out` is `None`.
pub fn emit(out: Option<&Path>, body: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => write_bytes(p, body),
        None => io::stdout()
            .write_all(body)
            .map_err(|e| CliError::Data(format!("cannot write to standard output: {e}"))),
    }
}

/// One curve: the CSV it reads, the 1-based column holding y, its title.
pub struct Curve {
    pub file: PathBuf,
    pub column: usize,
    pub title: String,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub logscale_x: bool,
}

pub fn gnuplot_script(plot: &Plot, curves: &[Curve]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{}'\n", plot.title));
    s.push_str(&format!("set xlabel '{}'\n", plot.xlabel));
    s.push_str(&format!("set ylabel '{}'\n", plot.ylabel));
    if plot.logscale_x {
        s.push_str("set logscale x\n");
    }
    s.push_str("set grid\n");
    let parts: Vec<String> = curves
        .iter()
        .map(|c| {
            format!(
                "'{}' using 1:{} with linespoints title '{}'",
                c.file.display(),
                c.column,
                c.title.replace('\'', "")
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s.push_str("pause mouse close\n");
    s
}

/// Write a plot script when `--gnuplot` was given; the data must have gone
/// to a file for the script to have something to read.
pub fn maybe_plot(gnuplot: Option<&Path>, plot: &Plot, curves: &[Curve]) -> CliResult<()> {
    let Some(path) = gnuplot else { return Ok(()) };
    if curves.is_empty() {
        return Err(CliError::Config("--gnuplot needs the data written to a file; pass --out".into()));
    }
    write_bytes(path, gnuplot_script(plot, curves).as_bytes())
}

pub fn require_out_for_plot(gnuplot: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    if gnuplot.is_some() && out.is_none() {
        return Err(CliError::Config("--gnuplot needs the data written to a file; pass --out".into()));
    }
    Ok(())
}

pub fn correlogram_csv(c: &CrossCorrelogram) -> Vec<u8> {
    let mut buf = Vec::new();
    xcausal::io::write_correlogram_csv(&mut buf, c).expect("writing to memory");
    buf
}

/// Read a `lag,rho` file written by this tool back into a correlogram.
pub fn read_correlogram(path: &Path) -> CliResult<CrossCorrelogram> {
    let bad = |why: String| CliError::Data(format!("{}: {why}", path.display()));
    let rows = read_raw_csv(read_text(path)?.as_bytes()).map_err(|e| bad(e.to_string()))?;
    if rows.len() < 3 || rows.len() % 2 == 0 {
        return Err(bad(format!("expected an odd number (at least 3) of lags, got {}", rows.len())));
    }
    let half = rows.len() / 2;
    let step = rows[half + 1].0 - rows[half].0;
    for (i, (h, _)) in rows.iter().enumerate() {
        let want = (i as f64 - half as f64) * step;
        if (h - want).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(bad(format!("lags are not a symmetric evenly spaced grid (row {})", i + 1)));
        }
    }
    let grid = LagGrid::new(step, half).map_err(|e| bad(e.to_string()))?;
    CrossCorrelogram::new(grid, rows.iter().map(|r| r.1).collect(), 0.0).map_err(|e| bad(e.to_string()))
}

/// File stem, used as the series or pair label.
pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into())
}
