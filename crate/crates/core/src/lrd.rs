//! Long-range dependence: periodogram Hurst regression, fractional pole
//! elimination on projections, and the time-domain binomial differencing
//! used to cross-check it.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::series::{IrregularSeries, RegularSeries};
use crate::spectral::{cross_spectrum, CrossSpectrum, FourierProjection};

pub const DEFAULT_LOW_FRACTION: f64 = 0.1;
pub const DEFAULT_TRUNCATION: usize = 256;
const MIN_REGRESSION_POINTS: usize = 8;
const HURST_FLOOR: f64 = 0.01;
const HURST_CEIL: f64 = 0.99;
/// Largest order applied when whitening from an estimated exponent.
pub const MAX_WHITENING_ALPHA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    pub hurst: f64,
    /// Log-log slope of the auto-spectrum against frequency.
    pub slope: f64,
    /// Standard error of `hurst` (half the slope's standard error).
    pub stderr: f64,
    pub n_freqs_used: usize,
    pub clipped: bool,
    /// Highest frequency in the regression window.
    pub max_frequency: f64,
}

impl HurstEstimate {
    /// Differentiation order that flattens the fitted power law, half the
    /// negated slope. For level spectra this is `H + 1/2` before clipping;
    /// for increment spectra it is `H - 1/2`.
    pub fn flattening_alpha(&self) -> f64 {
        (-self.slope / 2.0).clamp(0.0, MAX_WHITENING_ALPHA)
    }

    /// Reinterpret a fit made on increments: their spectrum falls like
    /// `f^-(2H-1)`, one power less than the levels'.
    pub fn from_increments(mut self) -> Self {
        let raw = (1.0 - self.slope) / 2.0;
        self.hurst = raw.clamp(HURST_FLOOR, HURST_CEIL);
        self.clipped = self.hurst != raw;
        self
    }
}

/// Ordinary least squares of `log I(f)` on `log f` over the lowest
/// `ceil(low_fraction * P)` frequencies; the spectrum behaves like
/// `f^-(2H+1)` there.
pub fn estimate_hurst(auto: &CrossSpectrum, low_fraction: f64) -> Result<HurstEstimate> {
    if !(low_fraction > 0.0 && low_fraction <= 0.5) {
        return Err(Error::param("low_fraction", format!("must lie in (0, 0.5], got {low_fraction}")));
    }
    let p = auto.values().len();
    let window = ((low_fraction * p as f64).ceil() as usize).min(p);
    let points: Vec<(f64, f64)> = auto.values()[..window]
        .iter()
        .enumerate()
        .filter(|(_, v)| v.re > 0.0)
        .map(|(i, v)| (auto.grid().frequency(i + 1).ln(), v.re.ln()))
        .collect();
    if points.len() < MIN_REGRESSION_POINTS {
        return Err(Error::TooFewFrequencies(points.len()));
    }
    let (slope, slope_se) = ols_slope(&points);
    let raw = (-slope - 1.0) / 2.0;
    let hurst = raw.clamp(HURST_FLOOR, HURST_CEIL);
    Ok(HurstEstimate {
        hurst,
        slope,
        stderr: slope_se / 2.0,
        n_freqs_used: points.len(),
        clipped: hurst != raw,
        max_frequency: auto.grid().frequency(window),
    })
}

fn ols_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = if points.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

/// Multiply each coefficient by `(i f)^alpha = f^alpha * exp(i alpha pi/2)`,
/// the frequency-domain counterpart of differentiating `alpha` times.
pub fn pole_eliminate(p: &FourierProjection, alpha: f64) -> Result<FourierProjection> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let rotation = Complex64::from_polar(1.0, alpha * FRAC_PI_2);
    Ok(p.map_coeffs(|_, f| rotation * f.powf(alpha)))
}

/// Differentiation order that cancels a pole of order `2H + 1`.
pub fn alpha_for_hurst(hurst: f64) -> f64 {
    (hurst + 0.5).clamp(0.0, MAX_WHITENING_ALPHA)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Whitening {
    pub alpha_x: f64,
    pub alpha_y: f64,
    /// Log-log slope of each whitened auto-spectrum over the low window,
    /// when the window is large enough to fit.
    pub residual_slope_x: Option<f64>,
    pub residual_slope_y: Option<f64>,
}

impl Whitening {
    /// Both residual slopes within 0.3 of flat.
    pub fn is_flat(&self) -> bool {
        [self.residual_slope_x, self.residual_slope_y]
            .iter()
            .all(|s| s.is_some_and(|s| s.abs() < 0.3))
    }
}

/// Whiten each projection by its own Hurst exponent.
pub fn whiten_pair(
    px: &FourierProjection,
    py: &FourierProjection,
    hurst_x: f64,
    hurst_y: f64,
) -> Result<(FourierProjection, FourierProjection, Whitening)> {
    whiten_pair_with(px, py, alpha_for_hurst(hurst_x), alpha_for_hurst(hurst_y))
}

/// Whiten with explicit differentiation orders.
pub fn whiten_pair_with(
    px: &FourierProjection,
    py: &FourierProjection,
    alpha_x: f64,
    alpha_y: f64,
) -> Result<(FourierProjection, FourierProjection, Whitening)> {
    let wx = pole_eliminate(px, alpha_x)?;
    let wy = pole_eliminate(py, alpha_y)?;
    let slope = |p: &FourierProjection| -> Option<f64> {
        let auto = cross_spectrum(p, p).ok()?;
        estimate_hurst(&auto, DEFAULT_LOW_FRACTION).ok().map(|h| h.slope)
    };
    let diag = Whitening {
        alpha_x,
        alpha_y,
        residual_slope_x: slope(&wx),
        residual_slope_y: slope(&wy),
    };
    Ok((wx, wy, diag))
}

/// Binomial weights of `(1 - B)^alpha`, `w_0 = 1`,
/// `w_h = w_{h-1} (h - 1 - alpha) / h`.
pub fn frac_diff_weights(alpha: f64, truncation: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(truncation + 1);
    w.push(1.0);
    for h in 1..=truncation {
        let prev = w[h - 1];
        w.push(prev * (h as f64 - 1.0 - alpha) / h as f64);
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct FracDiff {
    pub series: RegularSeries,
    /// Leading outputs computed from a partial window.
    pub burn_in: usize,
}

/// Truncated fractional difference `sum_{h=0}^{K} w_h x_{t-h}`.
pub fn frac_diff_time(s: &RegularSeries, alpha: f64, truncation: usize) -> Result<FracDiff> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if truncation > s.len() {
        return Err(Error::TruncationTooLong { truncation, len: s.len() });
    }
    let w = frac_diff_weights(alpha, truncation);
    let x = s.values();
    let out = (0..x.len())
        .map(|t| w.iter().take(t + 1).enumerate().map(|(h, wh)| wh * x[t - h]).sum())
        .collect();
    Ok(FracDiff { series: RegularSeries::new(s.start(), s.step(), out)?, burn_in: truncation })
}

/// Subtract the straight line through the first and last observation, so
/// the series vanishes at both ends of its span.
pub fn bridge(s: &IrregularSeries) -> IrregularSeries {
    let (t0, t1) = (s.first_time(), s.last_time());
    let (x0, x1) = (s.values()[0], s.values()[s.len() - 1]);
    let slope = (x1 - x0) / (t1 - t0);
    let values = s.pairs().map(|(t, x)| x - x0 - slope * (t - t0)).collect();
    IrregularSeries::new(s.label(), s.timestamps().to_vec(), values)
        .expect("same timestamps, finite values")
}
