//! Causal read-outs from correlograms: lead-lag ratio, characteristic
//! delay, percentile bands over Monte Carlo trials and day averages.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::series::{CrossCorrelogram, LagGrid};

/// Width of the band around 1 in which a ratio counts as symmetric.
pub const DEFAULT_THETA: f64 = 0.2;
/// Fewest trials accepted by [`percentile_band`].
pub const MIN_BAND_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    XCausesY,
    YCausesX,
    Symmetric,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::XCausesY => Direction::YCausesX,
            Direction::YCausesX => Direction::XCausesY,
            Direction::Symmetric => Direction::Symmetric,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XCausesY => "X_causes_Y",
            Direction::YCausesX => "Y_causes_X",
            Direction::Symmetric => "symmetric",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X_causes_Y" => Ok(Direction::XCausesY),
            "Y_causes_X" => Ok(Direction::YCausesX),
            "symmetric" => Ok(Direction::Symmetric),
            other => Err(Error::param("direction", format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrResult {
    /// `sum_{h>0} rho^2 / sum_{h<0} rho^2`; infinite when the negative side
    /// is identically zero.
    pub llr: f64,
    /// Lag of the correlogram maximum.
    pub delay: f64,
    pub peak_rho: f64,
    pub direction: Direction,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn llr(c: &CrossCorrelogram) -> LlrResult {
    llr_with_threshold(c, DEFAULT_THETA)
}

/// Lead-lag ratio with a positive peak lag meaning X leads Y. Ratios above
/// `1 + theta` read as X causing Y, below `1 / (1 + theta)` as the reverse.
pub fn llr_with_threshold(c: &CrossCorrelogram, theta: f64) -> LlrResult {
    let grid = c.lag_grid();
    let z = grid.zero_index();
    let rho = c.rho();
    let neg: f64 = rho[..z].iter().map(|r| r * r).sum();
    let pos: f64 = rho[z + 1..].iter().map(|r| r * r).sum();
    let ratio = if neg > 0.0 {
        pos / neg
    } else if pos > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let direction = if ratio > 1.0 + theta {
        Direction::XCausesY
    } else if ratio < 1.0 / (1.0 + theta) {
        Direction::YCausesX
    } else {
        Direction::Symmetric
    };
    let peak = c.argmax();
    LlrResult {
        llr: ratio,
        delay: grid.lag(peak),
        peak_rho: rho[peak],
        direction,
        n_pos: grid.half_count(),
        n_neg: grid.half_count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileBand {
    pub lag_grid: LagGrid,
    pub p05: Vec<f64>,
    pub p50: Vec<f64>,
    pub p95: Vec<f64>,
}

impl PercentileBand {
    /// Largest |value| reached by either band edge at a nonzero lag.
    pub fn max_abs_off_zero(&self) -> f64 {
        let z = self.lag_grid.zero_index();
        self.p05
            .iter()
            .chain(&self.p95)
            .enumerate()
            .filter(|(i, _)| i % self.p05.len() != z)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// Empirical quantile of sorted data with linear interpolation between
/// order statistics at position `q * (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn percentile_band(trials: &[CrossCorrelogram]) -> Result<PercentileBand> {
    percentile_band_min(trials, MIN_BAND_TRIALS)
}

/// As [`percentile_band`] with an explicit floor on the trial count.
pub fn percentile_band_min(trials: &[CrossCorrelogram], min_trials: usize) -> Result<PercentileBand> {
    if trials.len() < min_trials.max(1) {
        return Err(Error::TooFewTrials { needed: min_trials.max(1), got: trials.len() });
    }
    let lag_grid = *trials[0].lag_grid();
    if trials.iter().any(|c| *c.lag_grid() != lag_grid) {
        return Err(Error::GridMismatch);
    }
    let mut band = PercentileBand {
        lag_grid,
        p05: Vec::with_capacity(lag_grid.len()),
        p50: Vec::with_capacity(lag_grid.len()),
        p95: Vec::with_capacity(lag_grid.len()),
    };
    let mut column = Vec::with_capacity(trials.len());
    for i in 0..lag_grid.len() {
        column.clear();
        column.extend(trials.iter().map(|c| c.rho()[i]));
        column.sort_by(f64::total_cmp);
        band.p05.push(quantile(&column, 0.05));
        band.p50.push(quantile(&column, 0.5));
        band.p95.push(quantile(&column, 0.95));
    }
    Ok(band)
}

/// Element-wise mean over days; the imaginary residual is the worst day's.
pub fn daily_average(days: &[CrossCorrelogram]) -> Result<CrossCorrelogram> {
    let first = days.first().ok_or(Error::TooFewTrials { needed: 1, got: 0 })?;
    let grid = *first.lag_grid();
    if days.iter().any(|c| *c.lag_grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let n = days.len() as f64;
    let rho = (0..grid.len())
        .map(|i| days.iter().map(|c| c.rho()[i]).sum::<f64>() / n)
        .collect();
    let residual = days.iter().fold(0.0f64, |m, c| m.max(c.imag_residual()));
    CrossCorrelogram::new(grid, rho, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr(rho: Vec<f64>) -> CrossCorrelogram {
        let half = rho.len() / 2;
        CrossCorrelogram::new(LagGrid::new(0.5, half).unwrap(), rho, 0.0).unwrap()
    }

    #[test]
    fn even_correlogram_is_symmetric() {
        let r = llr(&corr(vec![0.1, 0.3, 1.0, 0.3, 0.1]));
        assert_eq!(r.llr, 1.0);
        assert_eq!(r.direction, Direction::Symmetric);
        assert_eq!(r.delay, 0.0);
    }

    #[test]
    fn hand_ratio() {
        let r = llr(&corr(vec![0.0, 0.5, 0.0, 1.0, 0.0]));
        assert_eq!(r.llr, 4.0);
        assert_eq!(r.direction, Direction::XCausesY);
        assert_eq!(r.delay, 0.5);
        assert_eq!(r.peak_rho, 1.0);
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
    }

    #[test]
    fn zero_denominator_is_infinite() {
        let r = llr(&corr(vec![0.0, 0.0, 1.0, 0.2, 0.0]));
        assert!(r.llr.is_infinite());
        assert_eq!(r.direction, Direction::XCausesY);
        let r = llr(&corr(vec![0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(r.llr, 1.0);
    }

    #[test]
    fn threshold_band() {
        let c = CrossCorrelogram::new(LagGrid::new(1.0, 1).unwrap(), vec![1.0, 0.0, 1.05], 0.0).unwrap();
        assert_eq!(llr(&c).direction, Direction::Symmetric);
        assert_eq!(llr_with_threshold(&c, 0.05).direction, Direction::XCausesY);
    }

    #[test]
    fn direction_names_round_trip() {
        for d in [Direction::XCausesY, Direction::YCausesX, Direction::Symmetric] {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
        }
    }

    #[test]
    fn band_of_identical_trials_collapses() {
        let c = corr(vec![0.2, -0.1, 1.0, 0.4, 0.0]);
        let band = percentile_band(&vec![c.clone(); 25]).unwrap();
        assert_eq!(band.p05, c.rho());
        assert_eq!(band.p50, c.rho());
        assert_eq!(band.p95, c.rho());
    }

    #[test]
    fn band_median_of_three() {
        let trials: Vec<_> = [-1.0, 0.0, 1.0].iter().map(|&v| corr(vec![v, 1.0, v])).collect();
        let band = percentile_band_min(&trials, 3).unwrap();
        assert_eq!(band.p50[0], 0.0);
        assert!((band.p05[0] + 0.9).abs() < 1e-12);
        assert!((band.p95[0] - 0.9).abs() < 1e-12);
        assert!(matches!(percentile_band(&trials), Err(Error::TooFewTrials { needed: 20, got: 3 })));
    }

    #[test]
    fn band_rejects_mixed_grids() {
        let mut trials = vec![corr(vec![0.0, 1.0, 0.0]); 20];
        trials.push(corr(vec![0.0, 0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(percentile_band(&trials), Err(Error::GridMismatch)));
    }

    #[test]
    fn quantile_matches_linear_rule() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 8.0);
        assert!((quantile(&xs, 0.5) - 3.0).abs() < 1e-12);
        // position 0.05 * 3 = 0.15
        assert!((quantile(&xs, 0.05) - 1.15).abs() < 1e-12);
    }

    #[test]
    fn daily_average_examples() {
        let c = corr(vec![0.1, 0.5, 1.0, 0.2, -0.3]);
        assert_eq!(daily_average(std::slice::from_ref(&c)).unwrap(), c);
        let avg = daily_average(&[c.clone(), c.scaled(-1.0)]).unwrap();
        assert!(avg.rho().iter().all(|r| *r == 0.0));
        assert!(daily_average(&[c, corr(vec![0.0, 1.0, 0.0])]).is_err());
    }

    fn rho_strategy() -> impl Strategy<Value = Vec<f64>> {
        (1usize..6).prop_flat_map(|h| prop::collection::vec(-1.0f64..1.0, 2 * h + 1))
    }

    proptest! {
        #[test]
        fn scaling_leaves_ratio_and_delay(rho in rho_strategy(), k in 0.01f64..100.0) {
            let c = corr(rho);
            let a = llr(&c);
            let b = llr(&c.scaled(k));
            prop_assert!((a.llr - b.llr).abs() <= 1e-12 * a.llr.abs().max(1.0) || a.llr == b.llr);
            prop_assert_eq!(a.delay, b.delay);
        }

        #[test]
        fn swapping_inverts(rho in rho_strategy()) {
            let c = corr(rho);
            let a = llr(&c);
            let b = llr(&c.reversed());
            if a.llr.is_finite() && b.llr.is_finite() {
                prop_assert!((a.llr * b.llr - 1.0).abs() < 1e-9);
            }
            prop_assert_eq!(b.direction, a.direction.opposite());
        }
    }
}
