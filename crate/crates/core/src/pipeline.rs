//! The frequency-domain correlogram pipeline: prepare each series, project,
//! optionally erase long memory, cross, smooth and invert.

use crate::error::Result;
use crate::lrd::{self, bridge, estimate_hurst, pole_eliminate, HurstEstimate, Whitening};
use crate::series::{demean, CrossCorrelogram, FrequencyGrid, IrregularSeries, LagGrid};
use crate::spectral::{cross_spectrum, invert_to_correlogram, project, smooth, FourierProjection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detrend {
    None,
    /// Subtract the line through the first and last observation.
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Erasure {
    Off,
    /// Multiply the projections by `(i f)^alpha` with known orders.
    Fixed { alpha_x: f64, alpha_y: f64 },
    /// Fit each series' spectral slope and whiten by half of it, which is
    /// `H + 1/2` on levels.
    Estimated { low_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierOptions {
    /// Project the changes between consecutive observations instead of the
    /// levels.
    pub increments: bool,
    pub detrend: Detrend,
    pub erasure: Erasure,
    /// Half-width of the moving average applied to every spectrum.
    pub smoothing: usize,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions { increments: false, detrend: Detrend::None, erasure: Erasure::Off, smoothing: 0 }
    }
}

impl FourierOptions {
    /// Levels, bridged, whitened by estimated exponents.
    pub fn erasing(low_fraction: f64) -> Self {
        FourierOptions {
            detrend: Detrend::Bridge,
            erasure: Erasure::Estimated { low_fraction },
            ..Default::default()
        }
    }
}

/// Correlogram plus what the erasure stage found.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAnalysis {
    pub correlogram: CrossCorrelogram,
    pub hurst_x: Option<HurstEstimate>,
    pub hurst_y: Option<HurstEstimate>,
    pub whitening: Option<Whitening>,
}

/// Apply the increment, detrend and centering steps.
pub fn prepare(s: &IrregularSeries, opts: &FourierOptions) -> Result<IrregularSeries> {
    let s = if opts.increments { s.increments()? } else { s.clone() };
    let s = match opts.detrend {
        Detrend::None => s,
        Detrend::Bridge => bridge(&s),
    };
    Ok(demean(&s))
}

/// Time from the earliest to the latest observation of either series.
pub fn joint_span(x: &IrregularSeries, y: &IrregularSeries) -> f64 {
    x.last_time().max(y.last_time()) - x.first_time().min(y.first_time())
}

pub fn hurst_of(p: &FourierProjection, low_fraction: f64) -> Result<HurstEstimate> {
    estimate_hurst(&cross_spectrum(p, p)?, low_fraction)
}

/// Everything after projection: erasure, spectra, smoothing, inversion.
pub fn analyze(
    px: &FourierProjection,
    py: &FourierProjection,
    lags: &LagGrid,
    opts: &FourierOptions,
) -> Result<PairAnalysis> {
    let (px, py, hurst_x, hurst_y, whitening) = match opts.erasure {
        Erasure::Off => (px.clone(), py.clone(), None, None, None),
        Erasure::Fixed { alpha_x, alpha_y } => {
            (pole_eliminate(px, alpha_x)?, pole_eliminate(py, alpha_y)?, None, None, None)
        }
        Erasure::Estimated { low_fraction } => {
            let hx = hurst_of(px, low_fraction)?;
            let hy = hurst_of(py, low_fraction)?;
            let (wx, wy, w) = lrd::whiten_pair_with(px, py, hx.flattening_alpha(), hy.flattening_alpha())?;
            let level = |h: HurstEstimate| if opts.increments { h.from_increments() } else { h };
            (wx, wy, Some(level(hx)), Some(level(hy)), Some(w))
        }
    };
    let mut cross = cross_spectrum(&px, &py)?;
    let mut auto_x = cross_spectrum(&px, &px)?;
    let mut auto_y = cross_spectrum(&py, &py)?;
    if opts.smoothing > 0 {
        cross = smooth(&cross, opts.smoothing)?;
        auto_x = smooth(&auto_x, opts.smoothing)?;
        auto_y = smooth(&auto_y, opts.smoothing)?;
    }
    let correlogram = invert_to_correlogram(&cross, &auto_x, &auto_y, lags)?;
    Ok(PairAnalysis { correlogram, hurst_x, hurst_y, whitening })
}

/// Full pipeline for one ordered pair.
pub fn fourier_correlogram(
    x: &IrregularSeries,
    y: &IrregularSeries,
    grid: &FrequencyGrid,
    lags: &LagGrid,
    opts: &FourierOptions,
) -> Result<PairAnalysis> {
    let px = project(&prepare(x, opts)?, grid)?;
    let py = project(&prepare(y, opts)?, grid)?;
    analyze(&px, &py, lags, opts)
}
