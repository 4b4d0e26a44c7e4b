//! Simulated pairs and the Monte Carlo studies built on them. Trials run in
//! parallel; each draws from its own seed, so results do not depend on the
//! thread count.

use rayon::prelude::*;

use crate::baselines::{hy_lagged_correlogram, locf_resample, regular_xcov};
use crate::causal::{llr_with_threshold, percentile_band, LlrResult, PercentileBand};
use crate::config::{DeltaF, ExperimentConfig, Model, PipelineKind};
use crate::error::Result;
use crate::pipeline::{self, Detrend, Erasure, FourierOptions, PairAnalysis};
use crate::series::{stdev, CrossCorrelogram, FrequencyGrid, IrregularSeries, LagGrid, RegularSeries};
use crate::synth::{self, CausalKernel};

/// The two simulated paths on the fine grid, before sampling.
pub fn simulate_paths(cfg: &ExperimentConfig, trial: u64) -> Result<(RegularSeries, RegularSeries)> {
    let seed = synth::trial_seed(cfg.seed, trial);
    let step = cfg.fine_step();
    let n = cfg.fine_steps;
    match cfg.model {
        Model::Fbm => {
            let (a, b) = synth::correlated_pair(cfg.hurst, cfg.rho, n, seed)?;
            let scale = step.powf(cfg.hurst);
            let a: Vec<f64> = a.iter().map(|v| v * scale).collect();
            let b: Vec<f64> = b.iter().map(|v| v * scale).collect();
            Ok((RegularSeries::integrate(0.0, step, &a)?, RegularSeries::integrate(cfg.tau, step, &b)?))
        }
        Model::Kernel => {
            let scale = step.powf(cfg.hurst);
            let dx: Vec<f64> = synth::simulate_fgn(cfg.hurst, n, synth::derive_seed(seed, 1))?
                .into_iter()
                .map(|v| v * scale)
                .collect();
            let kernel = CausalKernel::for_correlation(cfg.tau, cfg.kernel_beta, cfg.rho)?;
            let dy = synth::kernel_drive(&dx, &kernel, step, cfg.noise, synth::derive_seed(seed, 2))?;
            Ok((RegularSeries::integrate(0.0, step, &dx)?, RegularSeries::integrate(0.0, step, &dy)?))
        }
    }
}

/// Irregular observations of one trial's pair, labelled `x` and `y`.
pub fn simulate_pair(cfg: &ExperimentConfig, trial: u64) -> Result<(IrregularSeries, IrregularSeries)> {
    let seed = synth::trial_seed(cfg.seed, trial);
    let (px, py) = simulate_paths(cfg, trial)?;
    let x = synth::sample_irregular(&px, cfg.n_x, synth::derive_seed(seed, 3), "x")?;
    let y = synth::sample_irregular(&py, cfg.n_y, synth::derive_seed(seed, 4), "y")?;
    Ok((x, y))
}

/// Nominal mean gap of the denser series, `span / max(n_x, n_y)`. Grids
/// derived from the configuration rather than from each sample stay the
/// same across trials.
pub fn nominal_gap(cfg: &ExperimentConfig) -> f64 {
    cfg.span / cfg.n_x.max(cfg.n_y) as f64
}

pub fn frequency_grid(cfg: &ExperimentConfig) -> Result<FrequencyGrid> {
    match cfg.delta_f {
        DeltaF::Span => FrequencyGrid::from_span(cfg.span, cfg.projections),
        DeltaF::Resolution => {
            FrequencyGrid::for_resolution(cfg.lag_step.unwrap_or_else(|| nominal_gap(cfg)), cfg.projections)
        }
        DeltaF::Fixed(df) => FrequencyGrid::new(df, cfg.projections),
    }
}

pub fn fourier_options(cfg: &ExperimentConfig) -> FourierOptions {
    match cfg.pipeline {
        PipelineKind::FourierLrd => FourierOptions {
            increments: cfg.increments,
            detrend: if cfg.increments { Detrend::None } else { Detrend::Bridge },
            erasure: Erasure::Estimated { low_fraction: cfg.low_fraction },
            smoothing: cfg.smoothing,
        },
        _ => FourierOptions {
            increments: cfg.increments,
            detrend: Detrend::None,
            erasure: Erasure::Off,
            smoothing: cfg.smoothing,
        },
    }
}

/// Correlogram of one ordered pair with the configured pipeline.
pub fn analyze_pair(cfg: &ExperimentConfig, x: &IrregularSeries, y: &IrregularSeries) -> Result<PairAnalysis> {
    let plain = |correlogram| PairAnalysis { correlogram, hurst_x: None, hurst_y: None, whitening: None };
    match cfg.pipeline {
        PipelineKind::Fourier | PipelineKind::FourierLrd => {
            let grid = frequency_grid(cfg)?;
            let lags = LagGrid::new(cfg.lag_step.unwrap_or_else(|| grid.natural_lag_step()), cfg.lags)?;
            pipeline::fourier_correlogram(x, y, &grid, &lags, &fourier_options(cfg))
        }
        PipelineKind::Locf => {
            let step = cfg.lag_step.unwrap_or_else(|| nominal_gap(cfg));
            let start = x.first_time().max(y.first_time());
            let end = x.last_time().max(y.last_time());
            let count = ((end - start) / step).floor() as usize + 1;
            let lx = locf_resample(x, start, step, count)?.diff()?;
            let ly = locf_resample(y, start, step, count)?.diff()?;
            Ok(plain(regular_xcov(&lx, &ly, cfg.lags)?))
        }
        PipelineKind::Hy => {
            let lags = LagGrid::new(cfg.lag_step.unwrap_or_else(|| nominal_gap(cfg)), cfg.lags)?;
            Ok(plain(hy_lagged_correlogram(x, y, &lags)?))
        }
    }
}

/// Simulate and analyze every trial, in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<PairAnalysis>> {
    cfg.validate()?;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let (x, y) = simulate_pair(cfg, t)?;
            analyze_pair(cfg, &x, &y)
        })
        .collect()
}

/// 5th, 50th and 95th percentile of the correlogram over trials.
pub fn correlogram_band(cfg: &ExperimentConfig) -> Result<PercentileBand> {
    let runs = run_trials(cfg)?;
    let cs: Vec<CrossCorrelogram> = runs.into_iter().map(|a| a.correlogram).collect();
    percentile_band(&cs)
}

/// Lead-lag read-out of every trial.
pub fn lag_recovery(cfg: &ExperimentConfig) -> Result<Vec<LlrResult>> {
    Ok(run_trials(cfg)?
        .iter()
        .map(|a| llr_with_threshold(&a.correlogram, cfg.theta))
        .collect())
}

/// Median over trials of `|rho|` at lags with more than `min_steps` steps.
pub fn median_abs_beyond(correlograms: &[CrossCorrelogram], min_steps: i64) -> f64 {
    let mut vals: Vec<f64> = correlograms
        .iter()
        .flat_map(|c| {
            let g = *c.lag_grid();
            c.rho()
                .iter()
                .enumerate()
                .filter(move |(i, _)| g.step_at(*i).abs() > min_steps)
                .map(|(_, r)| r.abs())
                .collect::<Vec<_>>()
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    if vals.is_empty() {
        return f64::NAN;
    }
    crate::causal::quantile(&vals, 0.5)
}

/// Spread of the correlogram across trials for one projection count.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub projections: usize,
    pub lag_grid: LagGrid,
    /// Standard deviation over trials at each lag.
    pub std: Vec<f64>,
}

impl VarianceRow {
    pub fn std_at(&self, step: i64) -> f64 {
        self.std[(self.lag_grid.zero_index() as i64 + step) as usize]
    }
}

/// Standard deviation of `rho(h)` over trials for each projection count.
/// The lag grid is shared: `lag_step` if set, else `span / 100`.
pub fn variance_study(cfg: &ExperimentConfig, projections: &[usize]) -> Result<Vec<VarianceRow>> {
    cfg.validate()?;
    let pairs = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| simulate_pair(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let lag_grid = LagGrid::new(cfg.lag_step.unwrap_or(cfg.span / 100.0), cfg.lags)?;
    projections
        .iter()
        .map(|&p| {
            let mut c = cfg.clone();
            c.projections = p;
            c.lag_step = Some(lag_grid.delta_h());
            c.validate()?;
            let runs = pairs
                .par_iter()
                .map(|(x, y)| analyze_pair(&c, x, y).map(|a| a.correlogram))
                .collect::<Result<Vec<_>>>()?;
            let std = (0..lag_grid.len())
                .map(|i| stdev(&runs.iter().map(|r| r.rho()[i]).collect::<Vec<_>>()))
                .collect();
            Ok(VarianceRow { projections: p, lag_grid, std })
        })
        .collect()
}
