use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use xcausal::baselines::{locf_llr_experiment, LocfExperiment};
use xcausal::causal::{llr_with_threshold, percentile_band, PercentileBand};
use xcausal::config::{DeltaF, ExperimentConfig, PipelineKind};
use xcausal::experiments::{analyze_pair, correlogram_band, fourier_options, simulate_pair};
use xcausal::io::{read_raw_csv, write_key_values, write_series_csv};
use xcausal::parallel::{cost_report as ledger_for, run_partitioned, ParallelOptions};
use xcausal::pipeline::{analyze, prepare, Detrend, PairAnalysis};
use xcausal::spectral::{merge, project as fourier_project};
use xcausal::{dedup_and_sort, synth, CrossCorrelogram, FourierProjection, FrequencyGrid, IrregularSeries, LagGrid};

use crate::output::{
    correlogram_csv, emit, maybe_plot, read_correlogram, require_out_for_plot, stem, Curve, Plot,
};
use crate::settings::{read_text, write_bytes, CliError, CliResult, ConfigArgs, Context};

fn series_csv(s: &IrregularSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, s).expect("writing to memory");
    buf
}

fn key_values(pairs: &[(String, String)]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_key_values(&mut buf, pairs).expect("writing to memory");
    buf
}

fn load_series(path: &Path, label: &str) -> CliResult<IrregularSeries> {
    let text = read_text(path)?;
    let raw = read_raw_csv(text.as_bytes()).context(|| path.display().to_string())?;
    dedup_and_sort(label, &raw).context(|| path.display().to_string())
}

/// Load every input, labelled by file stem; repeated stems get a suffix so
/// pair names stay distinct.
fn load_all(paths: &[PathBuf]) -> CliResult<Vec<IrregularSeries>> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let base = stem(p);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            let label = if *n == 1 { base } else { format!("{base}_{n}") };
            load_series(p, &label)
        })
        .collect()
}

fn span_of(series: &[IrregularSeries]) -> f64 {
    let first = series.iter().map(|s| s.first_time()).fold(f64::INFINITY, f64::min);
    let last = series.iter().map(|s| s.last_time()).fold(f64::NEG_INFINITY, f64::max);
    last - first
}

fn densest_gap(series: &[IrregularSeries]) -> f64 {
    series.iter().map(|s| s.mean_gap()).fold(f64::INFINITY, f64::min)
}

fn sparsest_gap(series: &[IrregularSeries]) -> f64 {
    series.iter().map(|s| s.mean_gap()).fold(0.0, f64::max)
}

/// Frequency grid for observed data: the span policy uses the joint span
/// of the inputs rather than the configured simulation length.
fn data_grid(cfg: &ExperimentConfig, series: &[IrregularSeries]) -> CliResult<FrequencyGrid> {
    let grid = match cfg.delta_f {
        DeltaF::Span => FrequencyGrid::from_span(span_of(series), cfg.projections),
        DeltaF::Resolution => {
            FrequencyGrid::for_resolution(cfg.lag_step.unwrap_or_else(|| densest_gap(series)), cfg.projections)
        }
        DeltaF::Fixed(df) => FrequencyGrid::new(df, cfg.projections),
    };
    grid.context(|| "frequency grid".into())
}

fn warn_aliasing(lag_step: f64, mean_gap: f64) {
    if lag_step < mean_gap / 2.0 {
        eprintln!(
            "warning: lag step {lag_step} is below half the mean gap between observations ({mean_gap}); \
             the correlogram will alias"
        );
    }
}

fn pair_name(x: &str, y: &str) -> String {
    format!("{x}__{y}")
}

fn ordered_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).collect()
}

fn report(x: &str, y: &str, a: &PairAnalysis) {
    let mut line = format!(
        "{x} -> {y}: rho(0) = {:.4}, imag residual = {:.3e}",
        a.correlogram.rho_at_zero(),
        a.correlogram.imag_residual()
    );
    if let (Some(hx), Some(hy)) = (a.hurst_x, a.hurst_y) {
        let _ = write!(line, ", H({x}) = {:.3}, H({y}) = {:.3}", hx.hurst, hy.hurst);
    }
    if let Some(w) = &a.whitening {
        if !w.is_flat() {
            let _ = write!(line, " (whitened spectra not flat)");
        }
    }
    eprintln!("{line}");
}

/// Write pairwise correlograms: one file per pair in `out_dir`, or a long
/// `x,y,lag,rho` table on stdout.
fn emit_pairs(
    results: &[(String, String, CrossCorrelogram)],
    out_dir: Option<&Path>,
    gnuplot: Option<&Path>,
) -> CliResult<()> {
    require_out_for_plot(gnuplot, out_dir)?;
    match out_dir {
        Some(dir) => {
            let mut curves = Vec::new();
            for (x, y, c) in results {
                let file = dir.join(format!("{}.csv", pair_name(x, y)));
                write_bytes(&file, &correlogram_csv(c))?;
                curves.push(Curve { file, column: 2, title: format!("{x} -> {y}") });
            }
            let plot = Plot { title: "cross-correlogram", xlabel: "lag (s)", ylabel: "rho", logscale_x: false };
            maybe_plot(gnuplot, &plot, &curves)
        }
        None => {
            let mut body = String::from("x,y,lag,rho\n");
            for (x, y, c) in results {
                for (h, r) in c.iter() {
                    let _ = writeln!(body, "{x},{y},{h},{r}");
                }
            }
            emit(None, body.as_bytes())
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<()> {
    let width = (cfg.trials.saturating_sub(1)).to_string().len().max(3);
    let files = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let (x, y) = simulate_pair(cfg, t).context(|| format!("trial {t}"))?;
            Ok((t, series_csv(&x), series_csv(&y)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for (t, x, y) in files {
        write_bytes(&out_dir.join(format!("trial{t:0width$}_x.csv")), &x)?;
        write_bytes(&out_dir.join(format!("trial{t:0width$}_y.csv")), &y)?;
    }
    let mut meta = cfg.to_pairs();
    meta.extend((0..cfg.trials as u64).map(|t| (format!("trial_seed.{t}"), synth::trial_seed(cfg.seed, t).to_string())));
    write_bytes(&out_dir.join("metadata.txt"), &key_values(&meta))?;
    eprintln!("wrote {} series to {}", 2 * cfg.trials, out_dir.display());
    Ok(())
}

pub fn ingest(input: &Path, out: Option<&Path>, start: Option<f64>, end: Option<f64>) -> CliResult<()> {
    let text = read_text(input)?;
    let raw = read_raw_csv(text.as_bytes()).context(|| input.display().to_string())?;
    let mut s = dedup_and_sort(stem(input), &raw).context(|| input.display().to_string())?;
    let dropped = raw.len() - s.len();
    if start.is_some() || end.is_some() {
        s = s
            .window(start.unwrap_or(f64::NEG_INFINITY), end.unwrap_or(f64::INFINITY))
            .context(|| format!("{}: time window", input.display()))?;
    }
    eprintln!(
        "{}: {} observations kept ({} duplicate timestamps merged) over [{}, {}], mean gap {}",
        s.label(),
        s.len(),
        dropped,
        s.first_time(),
        s.last_time(),
        s.mean_gap()
    );
    emit(out, &series_csv(&s))
}

pub fn project(
    inputs: &[PathBuf],
    cfg: &ExperimentConfig,
    out_dir: &Path,
    bridge: bool,
    deterministic: bool,
    ledger: Option<&Path>,
) -> CliResult<()> {
    let mut series = load_all(inputs)?;
    if cfg.increments {
        series = series
            .iter()
            .map(|s| s.increments().context(|| s.label().to_string()))
            .collect::<CliResult<_>>()?;
    }
    let grid = data_grid(cfg, &series)?;
    let detrend = if bridge || fourier_options(cfg).detrend == Detrend::Bridge { Detrend::Bridge } else { Detrend::None };
    let opts = ParallelOptions { workers: cfg.workers, detrend, deterministic, seed: cfg.seed };
    let run = run_partitioned(&series, &grid, &opts).context(|| "partitioned projection".into())?;
    for p in &run.projections {
        write_bytes(&out_dir.join(format!("{}.sig", p.label())), &p.to_bytes())?;
    }
    let label_bytes = series.iter().map(|s| s.label().len()).sum();
    let n = series.iter().map(|s| s.len()).max().unwrap_or(0);
    let cost = ledger_for(series.len(), grid.count(), n, cfg.workers, label_bytes)?;
    let mut pairs = cost.to_pairs();
    let max = |v: &[usize]| v.iter().copied().max().unwrap_or(0).to_string();
    pairs.push(("measured_bytes_sent_per_worker".into(), max(&run.signature_bytes_per_worker)));
    pairs.push(("measured_exchange_bytes_per_worker".into(), max(&run.exchange_bytes_per_worker)));
    pairs.push(("delta_f".into(), grid.delta_f().to_string()));
    let body = key_values(&pairs);
    if let Some(path) = ledger {
        write_bytes(path, &body)?;
    }
    emit(None, &body)
}

fn read_signatures(paths: &[PathBuf]) -> CliResult<Vec<FourierProjection>> {
    let mut merged: Vec<FourierProjection> = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let p = FourierProjection::from_bytes(&bytes).context(|| path.display().to_string())?;
        match merged.iter_mut().find(|m| m.label() == p.label()) {
            Some(m) => *m = merge(m, &p).context(|| path.display().to_string())?,
            None => merged.push(p),
        }
    }
    if let Some(first) = merged.first() {
        if let Some(other) = merged.iter().find(|p| p.grid() != first.grid()) {
            return Err(CliError::Data(format!(
                "signatures `{}` and `{}` use different frequency grids",
                first.label(),
                other.label()
            )));
        }
    }
    Ok(merged)
}

pub fn reduce(paths: &[PathBuf], cfg: &ExperimentConfig, out_dir: Option<&Path>, gnuplot: Option<&Path>) -> CliResult<()> {
    require_out_for_plot(gnuplot, out_dir)?;
    let projections = read_signatures(paths)?;
    if projections.len() < 2 {
        return Err(CliError::Data(format!("need signatures of at least 2 series, got {}", projections.len())));
    }
    let grid = *projections[0].grid();
    let lags = LagGrid::new(cfg.lag_step.unwrap_or_else(|| grid.natural_lag_step()), cfg.lags)?;
    let period = 2.0 * std::f64::consts::PI / grid.delta_f();
    let sparsest = projections.iter().map(|p| p.n_obs()).min().unwrap_or(1).max(1);
    warn_aliasing(lags.delta_h(), period / sparsest as f64);
    let opts = fourier_options(cfg);
    let results = ordered_pairs(projections.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (px, py) = (&projections[i], &projections[j]);
            let a = analyze(px, py, &lags, &opts).context(|| format!("pair {} -> {}", px.label(), py.label()))?;
            report(px.label(), py.label(), &a);
            Ok((px.label().to_string(), py.label().to_string(), a.correlogram))
        })
        .collect::<CliResult<Vec<_>>>()?;
    emit_pairs(&results, out_dir, gnuplot)
}

/// `cfg` adjusted to describe an observed pair instead of a simulation.
fn observed(cfg: &ExperimentConfig, x: &IrregularSeries, y: &IrregularSeries, pipeline: PipelineKind) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.pipeline = pipeline;
    c.n_x = x.len();
    c.n_y = y.len();
    c.span = xcausal::pipeline::joint_span(x, y);
    c
}

pub fn xcorr(inputs: &[PathBuf], cfg: &ExperimentConfig, out_dir: Option<&Path>, gnuplot: Option<&Path>) -> CliResult<()> {
    require_out_for_plot(gnuplot, out_dir)?;
    if inputs.len() < 2 {
        return Err(CliError::Config(format!("need at least 2 input series, got {}", inputs.len())));
    }
    let series = load_all(inputs)?;
    let results = match cfg.pipeline {
        PipelineKind::Fourier | PipelineKind::FourierLrd => {
            let grid = data_grid(cfg, &series)?;
            let lags = LagGrid::new(cfg.lag_step.unwrap_or_else(|| grid.natural_lag_step()), cfg.lags)?;
            warn_aliasing(lags.delta_h(), sparsest_gap(&series));
            let opts = fourier_options(cfg);
            let projections = series
                .par_iter()
                .map(|s| {
                    let prepared = prepare(s, &opts).context(|| s.label().to_string())?;
                    fourier_project(&prepared, &grid).context(|| s.label().to_string())
                })
                .collect::<CliResult<Vec<_>>>()?;
            ordered_pairs(series.len())
                .into_par_iter()
                .map(|(i, j)| {
                    let (px, py) = (&projections[i], &projections[j]);
                    let a = analyze(px, py, &lags, &opts)
                        .context(|| format!("pair {} -> {}", px.label(), py.label()))?;
                    report(px.label(), py.label(), &a);
                    Ok((px.label().to_string(), py.label().to_string(), a.correlogram))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
        kind => ordered_pairs(series.len())
            .into_par_iter()
            .map(|(i, j)| {
                let (x, y) = (&series[i], &series[j]);
                let c = observed(cfg, x, y, kind);
                let a = analyze_pair(&c, x, y).context(|| format!("pair {} -> {}", x.label(), y.label()))?;
                Ok((x.label().to_string(), y.label().to_string(), a.correlogram))
            })
            .collect::<CliResult<Vec<_>>>()?,
    };
    emit_pairs(&results, out_dir, gnuplot)
}

pub fn hurst(inputs: &[PathBuf], cfg: &ExperimentConfig) -> CliResult<()> {
    let series = load_all(inputs)?;
    let mut opts = fourier_options(cfg);
    opts.detrend = if cfg.increments { Detrend::None } else { Detrend::Bridge };
    let mut body = String::from("series,hurst,slope,stderr,n_freqs,max_frequency,clipped\n");
    for s in &series {
        let grid = data_grid(cfg, std::slice::from_ref(s))?;
        let p = fourier_project(&prepare(s, &opts).context(|| s.label().to_string())?, &grid)
            .context(|| s.label().to_string())?;
        let mut h = xcausal::pipeline::hurst_of(&p, cfg.low_fraction).context(|| s.label().to_string())?;
        if cfg.increments {
            h = h.from_increments();
        }
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            s.label(),
            h.hurst,
            h.slope,
            h.stderr,
            h.n_freqs_used,
            h.max_frequency,
            h.clipped
        );
    }
    emit(None, body.as_bytes())
}

pub fn baseline(
    x: &Path,
    y: &Path,
    pipeline: PipelineKind,
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    gnuplot: Option<&Path>,
) -> CliResult<()> {
    require_out_for_plot(gnuplot, out)?;
    let series = load_all(&[x.to_path_buf(), y.to_path_buf()])?;
    let (sx, sy) = (&series[0], &series[1]);
    let c = observed(cfg, sx, sy, pipeline);
    if let Some(h) = c.lag_step {
        warn_aliasing(h, sparsest_gap(&series));
    }
    let a = analyze_pair(&c, sx, sy).context(|| format!("pair {} -> {}", sx.label(), sy.label()))?;
    emit(out, &correlogram_csv(&a.correlogram))?;
    if let Some(file) = out {
        let title = format!("{pipeline} {} -> {}", sx.label(), sy.label());
        let plot = Plot { title: &title, xlabel: "lag (s)", ylabel: "rho", logscale_x: false };
        maybe_plot(gnuplot, &plot, &[Curve { file: file.to_path_buf(), column: 2, title: "rho".into() }])?;
    }
    Ok(())
}

pub fn llr(paths: &[PathBuf], theta: f64, out: Option<&Path>) -> CliResult<()> {
    if theta.is_nan() || theta < 0.0 {
        return Err(CliError::Config(format!("--theta must be nonnegative, got {theta}")));
    }
    let mut body = String::from("pair,llr,delay,peak_rho,direction\n");
    for p in paths {
        let c = read_correlogram(p)?;
        let r = llr_with_threshold(&c, theta);
        let _ = writeln!(body, "{},{},{},{},{}", stem(p), r.llr, r.delay, r.peak_rho, r.direction);
    }
    emit(out, body.as_bytes())
}

fn band_csv(b: &PercentileBand) -> String {
    let mut body = String::from("lag,p05,p50,p95\n");
    for (i, h) in b.lag_grid.lags().enumerate() {
        let _ = writeln!(body, "{h},{},{},{}", b.p05[i], b.p50[i], b.p95[i]);
    }
    body
}

pub fn band(paths: &[PathBuf], args: &ConfigArgs, out: Option<&Path>, gnuplot: Option<&Path>) -> CliResult<()> {
    require_out_for_plot(gnuplot, out)?;
    let b = if paths.is_empty() {
        correlogram_band(&args.experiment()?).context(|| "simulated band".into())?
    } else {
        let cs = paths.iter().map(|p| read_correlogram(p)).collect::<CliResult<Vec<_>>>()?;
        percentile_band(&cs).context(|| "band".into())?
    };
    emit(out, band_csv(&b).as_bytes())?;
    if let Some(file) = out {
        let plot = Plot { title: "percentile band over trials", xlabel: "lag (s)", ylabel: "rho", logscale_x: false };
        let curves = ["p05", "p50", "p95"]
            .iter()
            .enumerate()
            .map(|(k, t)| Curve { file: file.to_path_buf(), column: k + 2, title: (*t).into() })
            .collect::<Vec<_>>();
        maybe_plot(gnuplot, &plot, &curves)?;
    }
    Ok(())
}

/// Settings that mean something for the sampling-ratio experiment. Keys
/// of the general experiment settings that do not apply are ignored so a
/// shared file can be reused.
fn locf_settings(layers: &[(String, String)]) -> CliResult<LocfExperiment> {
    let mut e = LocfExperiment::default();
    for (k, v) in layers {
        let bad = || CliError::Config(format!("invalid value `{v}` for `{k}`"));
        let int = || v.parse::<usize>().map_err(|_| bad());
        match k.as_str() {
            "seed" => e.seed = v.parse().map_err(|_| bad())?,
            "trials" => e.trials = int()?,
            "n1" | "n_x" | "n_obs" => e.n1 = int()?,
            "projections" => e.projections = int()?,
            "rho" => e.rho = v.parse().map_err(|_| bad())?,
            "fine_steps" => e.fine_steps = int()?,
            "lags" => {
                e.locf_lags = int()?;
                e.fourier_lags = e.locf_lags;
            }
            other if ExperimentConfig::KEYS.contains(&other) => {}
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
    }
    Ok(e)
}

pub fn table1(layers: &[(String, String)], ratios: &[f64], out: Option<&Path>) -> CliResult<()> {
    let base = locf_settings(layers)?;
    if ratios.is_empty() {
        return Err(CliError::Config("--ratios needs at least one value".into()));
    }
    let mut body = String::from("ratio,locf_mean,locf_std,fourier_mean,fourier_std\n");
    for &ratio in ratios {
        let cfg = LocfExperiment { ratio, ..base.clone() };
        let r = locf_llr_experiment(&cfg).context(|| format!("ratio {ratio}"))?;
        let _ = writeln!(body, "{ratio},{},{},{},{}", r.locf.mean, r.locf.std, r.fourier.mean, r.fourier.std);
        eprintln!(
            "ratio {ratio}: LOCF {:.3} +/- {:.3}, Fourier {:.3} +/- {:.3}",
            r.locf.mean, r.locf.std, r.fourier.mean, r.fourier.std
        );
    }
    emit(out, body.as_bytes())
}

pub fn variance_study(cfg: &ExperimentConfig, sweep: &[usize], out: Option<&Path>, gnuplot: Option<&Path>) -> CliResult<()> {
    require_out_for_plot(gnuplot, out)?;
    if sweep.is_empty() {
        return Err(CliError::Config("--sweep needs at least one projection count".into()));
    }
    let rows = xcausal::experiments::variance_study(cfg, sweep).context(|| "variance study".into())?;
    let mut body = String::from("lag");
    for r in &rows {
        let _ = write!(body, ",P{}", r.projections);
    }
    body.push('\n');
    let grid = rows[0].lag_grid;
    for (i, h) in grid.lags().enumerate() {
        let _ = write!(body, "{h}");
        for r in &rows {
            let _ = write!(body, ",{}", r.std[i]);
        }
        body.push('\n');
    }
    emit(out, body.as_bytes())?;
    if let Some(file) = out {
        let plot = Plot {
            title: "std of rho over trials",
            xlabel: "lag (s)",
            ylabel: "standard deviation",
            logscale_x: false,
        };
        let curves = rows
            .iter()
            .enumerate()
            .map(|(k, r)| Curve { file: file.to_path_buf(), column: k + 2, title: format!("P = {}", r.projections) })
            .collect::<Vec<_>>();
        maybe_plot(gnuplot, &plot, &curves)?;
    }
    Ok(())
}

pub fn cost_report(d: usize, p: usize, n: usize, k: usize, label_bytes: usize, out: Option<&Path>) -> CliResult<()> {
    let ledger = ledger_for(d, p, n, k, label_bytes)?;
    emit(out, &key_values(&ledger.to_pairs()))
}
