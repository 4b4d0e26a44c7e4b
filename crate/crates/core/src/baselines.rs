//! Time-domain comparators: last-observation-carried-forward resampling with
//! the regular-grid cross-covariance, and the Hayashi-Yoshida estimator.

use rayon::prelude::*;

use crate::causal::llr;
use crate::error::{Error, Result};
use crate::pipeline::{fourier_correlogram, joint_span, Detrend, Erasure, FourierOptions};
use crate::series::{mean, stdev, CrossCorrelogram, FrequencyGrid, IrregularSeries, LagGrid, RegularSeries};
use crate::synth;

/// Resample onto `start + n * step`, `n < count`, holding the last value
/// observed at or before each grid point.
pub fn locf_resample(s: &IrregularSeries, start: f64, step: f64, count: usize) -> Result<RegularSeries> {
    if start < s.first_time() {
        return Err(Error::GridBeforeData { grid_start: start, first: s.first_time() });
    }
    if count == 0 {
        return Err(Error::param("count", "grid needs at least one point"));
    }
    let (ts, vs) = (s.timestamps(), s.values());
    let mut j = 0;
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let g = start + n as f64 * step;
        while j + 1 < ts.len() && ts[j + 1] <= g {
            j += 1;
        }
        out.push(vs[j]);
    }
    RegularSeries::new(start, step, out)
}

/// Cross-correlogram of two series on the same grid. Each input is
/// centered; lag `h >= 0` averages `x[n-h] y[n]` with weight `1/(N-h-1)`,
/// negative lags use the mirrored sum, and the result is normalized by the
/// zero-lag autocovariances.
pub fn regular_xcov(x: &RegularSeries, y: &RegularSeries, max_lag_steps: usize) -> Result<CrossCorrelogram> {
    if !x.same_grid(y) {
        return Err(Error::GridMismatch);
    }
    let n = x.len();
    if max_lag_steps == 0 || 2 * max_lag_steps >= n {
        return Err(Error::param(
            "max_lag_steps",
            format!("must lie in [1, N/2) for N = {n}, got {max_lag_steps}"),
        ));
    }
    let center = |v: &[f64]| -> Vec<f64> {
        let m = mean(v);
        v.iter().map(|a| a - m).collect()
    };
    let (xc, yc) = (center(x.values()), center(y.values()));
    let cov = |a: &[f64], b: &[f64], h: usize| -> f64 {
        let s: f64 = a[..n - h].iter().zip(&b[h..]).map(|(p, q)| p * q).sum();
        s / (n - h - 1) as f64
    };
    let gxx = cov(&xc, &xc, 0);
    let gyy = cov(&yc, &yc, 0);
    for g in [gxx, gyy] {
        if !(g > 0.0) {
            return Err(Error::DegenerateVariance(g));
        }
    }
    let norm = (gxx * gyy).sqrt();
    let lags = LagGrid::new(x.step(), max_lag_steps)?;
    let rho = (0..lags.len())
        .map(|i| {
            let k = lags.step_at(i);
            let h = k.unsigned_abs() as usize;
            let g = if k >= 0 { cov(&xc, &yc, h) } else { cov(&yc, &xc, h) };
            g / norm
        })
        .collect();
    CrossCorrelogram::new(lags, rho, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyEstimate {
    pub covariance: f64,
    pub correlation: f64,
}

/// Sum of increment products over every pair of inter-observation intervals
/// whose interiors intersect.
pub fn hy_covariance(x: &IrregularSeries, y: &IrregularSeries) -> Result<f64> {
    if x.last_time() <= y.first_time() || y.last_time() <= x.first_time() {
        return Err(Error::NoOverlap);
    }
    let (tx, vx) = (x.timestamps(), x.values());
    let (ty, vy) = (y.timestamps(), y.values());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i + 1 < tx.len() && j + 1 < ty.len() {
        let (a0, a1) = (tx[i], tx[i + 1]);
        let (b0, b1) = (ty[j], ty[j + 1]);
        if a0.max(b0) < a1.min(b1) {
            sum += (vx[i + 1] - vx[i]) * (vy[j + 1] - vy[j]);
        }
        if a1 < b1 {
            i += 1;
        } else if b1 < a1 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    Ok(sum)
}

fn realized_variance(s: &IrregularSeries) -> f64 {
    s.values().windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

pub fn hayashi_yoshida(x: &IrregularSeries, y: &IrregularSeries) -> Result<HyEstimate> {
    let covariance = hy_covariance(x, y)?;
    let norm = (realized_variance(x) * realized_variance(y)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateVariance(norm));
    }
    Ok(HyEstimate { covariance, correlation: covariance / norm })
}

/// HY correlation between `x` and `y` with its timestamps moved by `-h`,
/// for every lag `h` of the grid.
pub fn hy_lagged_correlogram(x: &IrregularSeries, y: &IrregularSeries, lags: &LagGrid) -> Result<CrossCorrelogram> {
    let norm = (realized_variance(x) * realized_variance(y)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateVariance(norm));
    }
    let rho = lags
        .lags()
        .map(|h| hy_covariance(x, &y.shifted(-h)).map(|c| c / norm))
        .collect::<Result<Vec<_>>>()?;
    CrossCorrelogram::new(*lags, rho, 0.0)
}

/// Settings for the LOCF-versus-Fourier lead-lag comparison on
/// simultaneously correlated Brownian motions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocfExperiment {
    /// Observation draws for the denser series.
    pub n1: usize,
    /// `n1 / n2`.
    pub ratio: f64,
    pub projections: usize,
    pub trials: usize,
    /// Correlation of the increments.
    pub rho: f64,
    /// Length of the simulation grid the observations are drawn from.
    pub fine_steps: usize,
    /// Lags on each side for the LOCF correlogram, in resampling steps.
    pub locf_lags: usize,
    /// Lags on each side for the Fourier correlogram, in natural steps.
    pub fourier_lags: usize,
    pub seed: u64,
}

impl Default for LocfExperiment {
    fn default() -> Self {
        LocfExperiment {
            n1: 10_000,
            ratio: 1.0,
            projections: 1000,
            trials: 100,
            rho: 0.9,
            fine_steps: 1 << 18,
            locf_lags: 50,
            fourier_lags: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let m = mean(&values);
        // sample standard deviation
        let std = if values.len() > 1 { stdev(&values) * (n / (n - 1.0)).sqrt() } else { 0.0 };
        Summary { mean: m, std, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocfComparison {
    pub ratio: f64,
    pub locf: Summary,
    pub fourier: Summary,
}

/// LLR of the LOCF and Fourier pipelines for one simulated pair, the denser
/// series first.
pub fn locf_llr_trial(cfg: &LocfExperiment, trial: u64) -> Result<(f64, f64)> {
    let seed = synth::trial_seed(cfg.seed, trial);
    let (dx, dy) = synth::correlated_pair(0.5, cfg.rho, cfg.fine_steps, seed)?;
    let px = RegularSeries::integrate(0.0, 1.0, &dx)?;
    let py = RegularSeries::integrate(0.0, 1.0, &dy)?;
    let n2 = (cfg.n1 as f64 / cfg.ratio).round() as usize;
    let x = synth::sample_irregular(&px, cfg.n1, synth::derive_seed(seed, 3), "x")?;
    let y = synth::sample_irregular(&py, n2, synth::derive_seed(seed, 4), "y")?;

    let step = px.end() / cfg.n1 as f64;
    let start = x.first_time().max(y.first_time());
    let end = x.last_time().max(y.last_time());
    let count = ((end - start) / step).floor() as usize + 1;
    let lx = locf_resample(&x, start, step, count)?.diff()?;
    let ly = locf_resample(&y, start, step, count)?.diff()?;
    let locf = llr(&regular_xcov(&lx, &ly, cfg.locf_lags)?).llr;

    let grid = FrequencyGrid::from_span(joint_span(&x, &y), cfg.projections)?;
    let lags = LagGrid::new(grid.natural_lag_step(), cfg.fourier_lags)?;
    let opts = FourierOptions {
        increments: false,
        detrend: Detrend::Bridge,
        erasure: Erasure::Fixed { alpha_x: 1.0, alpha_y: 1.0 },
        smoothing: 0,
    };
    let fourier = llr(&fourier_correlogram(&x, &y, &grid, &lags, &opts)?.correlogram).llr;
    Ok((locf, fourier))
}

/// Mean and spread of both pipelines' LLR over independent trials.
pub fn locf_llr_experiment(cfg: &LocfExperiment) -> Result<LocfComparison> {
    if !(cfg.ratio >= 1.0) {
        return Err(Error::param("ratio", format!("must be at least 1, got {}", cfg.ratio)));
    }
    if cfg.trials < 30 {
        return Err(Error::TooFewTrials { needed: 30, got: cfg.trials });
    }
    let results = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| locf_llr_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let (locf, fourier): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(LocfComparison { ratio: cfg.ratio, locf: Summary::of(locf), fourier: Summary::of(fourier) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn irr(ts: &[f64], vs: &[f64]) -> IrregularSeries {
        IrregularSeries::new("s", ts.to_vec(), vs.to_vec()).unwrap()
    }

    fn hy_brute(x: &IrregularSeries, y: &IrregularSeries) -> f64 {
        let (tx, vx, ty, vy) = (x.timestamps(), x.values(), y.timestamps(), y.values());
        let mut s = 0.0;
        for i in 0..tx.len() - 1 {
            for j in 0..ty.len() - 1 {
                let lo = tx[i].max(ty[j]);
                let hi = tx[i + 1].min(ty[j + 1]);
                if lo < hi {
                    s += (vx[i + 1] - vx[i]) * (vy[j + 1] - vy[j]);
                }
            }
        }
        s
    }

    #[test]
    fn locf_examples() {
        let s = irr(&[0.0, 2.0], &[1.0, 3.0]);
        assert_eq!(locf_resample(&s, 0.0, 1.0, 3).unwrap().values(), &[1.0, 1.0, 3.0]);
        let s = irr(&[0.0, 0.9], &[5.0, 7.0]);
        assert_eq!(locf_resample(&s, 0.0, 0.5, 2).unwrap().values(), &[5.0, 5.0]);
        let s = irr(&[0.0, 1.0, 2.0, 3.0], &[4.0, -1.0, 2.0, 8.0]);
        assert_eq!(locf_resample(&s, 0.0, 1.0, 4).unwrap().values(), s.values());
        assert!(matches!(locf_resample(&s, -0.5, 1.0, 4), Err(Error::GridBeforeData { .. })));
    }

    #[test]
    fn xcov_of_self_and_shift() {
        let v: Vec<f64> = (0..64).map(|i| ((i * 37 % 23) as f64).sin()).collect();
        let x = RegularSeries::new(0.0, 1.0, v.clone()).unwrap();
        let c = regular_xcov(&x, &x, 5).unwrap();
        assert!((c.rho_at_zero() - 1.0).abs() < 1e-12);
        // y[n] = x[n - 3]
        let mut shifted = vec![0.0; 3];
        shifted.extend_from_slice(&v[..61]);
        let y = RegularSeries::new(0.0, 1.0, shifted).unwrap();
        let c = regular_xcov(&x, &y, 8).unwrap();
        assert_eq!(c.lag_grid().lag(c.argmax()), 3.0);
    }

    #[test]
    fn xcov_matches_double_loop() {
        let a = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9, -2.2, 0.1];
        let b = [1.1, 0.4, -0.9, 2.0, -1.5, 0.2, 0.8, -0.6];
        let x = RegularSeries::new(0.0, 0.25, a.to_vec()).unwrap();
        let y = RegularSeries::new(0.0, 0.25, b.to_vec()).unwrap();
        let c = regular_xcov(&x, &y, 3).unwrap();
        let n = a.len();
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let gamma = |p: &[f64], mp: f64, q: &[f64], mq: f64, h: i64| -> f64 {
            let mut s = 0.0;
            let mut count = 0;
            for t in 0..n as i64 {
                let u = t - h;
                if u >= 0 && u < n as i64 {
                    s += (p[u as usize] - mp) * (q[t as usize] - mq);
                    count += 1;
                }
            }
            s / (count - 1) as f64
        };
        let norm = (gamma(&a, ma, &a, ma, 0) * gamma(&b, mb, &b, mb, 0)).sqrt();
        for (i, h) in (-3i64..=3).enumerate() {
            let expect = gamma(&a, ma, &b, mb, h) / norm;
            assert!((c.rho()[i] - expect).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn xcov_guards() {
        let x = RegularSeries::new(0.0, 1.0, vec![2.0; 10]).unwrap();
        let y = RegularSeries::new(0.0, 1.0, (0..10).map(f64::from).collect()).unwrap();
        assert!(matches!(regular_xcov(&x, &y, 2), Err(Error::DegenerateVariance(_))));
        assert!(regular_xcov(&y, &y, 5).is_err());
        let z = RegularSeries::new(0.5, 1.0, vec![0.0; 10]).unwrap();
        assert!(matches!(regular_xcov(&y, &z, 2), Err(Error::GridMismatch)));
    }

    #[test]
    fn hy_hand_example() {
        let x = irr(&[0.0, 2.0, 3.0], &[0.0, 2.0, 3.0]);
        let y = irr(&[0.0, 1.0, 3.0], &[0.0, 1.0, 3.0]);
        assert_eq!(hy_covariance(&x, &y).unwrap(), 8.0);
        assert_eq!(hy_covariance(&y, &x).unwrap(), 8.0);
    }

    #[test]
    fn hy_synchronous_is_realized_covariance() {
        let ts = [0.0, 0.5, 1.5, 2.0, 3.5];
        let x = irr(&ts, &[1.0, 2.0, 0.0, 1.5, 1.0]);
        let y = irr(&ts, &[0.0, -1.0, 2.0, 2.5, 4.0]);
        let rc: f64 = x
            .values()
            .windows(2)
            .zip(y.values().windows(2))
            .map(|(a, b)| (a[1] - a[0]) * (b[1] - b[0]))
            .sum();
        assert!((hy_covariance(&x, &y).unwrap() - rc).abs() < 1e-15);
        assert!((hayashi_yoshida(&x, &x).unwrap().correlation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hy_correlation_can_leave_unit_interval() {
        // Asynchronous grids: HY(x,y) = a + b while HY(x,x) = a^2 + b^2 and
        // HY(y,y) = (a + b)^2, so the ratio reaches sqrt(2) when a = b.
        let x = irr(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]);
        let y = irr(&[0.0, 2.0], &[0.0, 2.0]);
        let r = hayashi_yoshida(&x, &y).unwrap().correlation;
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hy_disjoint_spans() {
        let x = irr(&[0.0, 1.0], &[0.0, 1.0]);
        let y = irr(&[1.0, 2.0], &[0.0, 1.0]);
        assert!(matches!(hy_covariance(&x, &y), Err(Error::NoOverlap)));
    }

    #[test]
    fn lagged_hy_examples() {
        // dyadic times keep the shifts exact
        let path = synth::fbm_path(0.5, 4000, 1.0 / 128.0, 8).unwrap();
        let x = synth::sample_irregular(&path, 1500, 9, "x").unwrap();
        let y = x.shifted(0.25).with_label("y");
        let lags = LagGrid::new(1.0 / 16.0, 8).unwrap();
        let c = hy_lagged_correlogram(&x, &y, &lags).unwrap();
        assert_eq!(lags.lag(c.argmax()), 0.25);
        assert!((c.rho()[c.argmax()] - 1.0).abs() < 1e-12);
        let plain = hayashi_yoshida(&x, &y).unwrap().correlation;
        assert!((c.rho_at_zero() - plain).abs() < 1e-15);
    }

    #[test]
    fn independent_brownian_hy_is_small() {
        let lags = LagGrid::new(5.0, 5).unwrap();
        let mut ok = 0;
        for trial in 0..100u64 {
            let path_x = synth::fbm_path(0.5, 40_000, 1.0, 2 * trial).unwrap();
            let path_y = synth::fbm_path(0.5, 40_000, 1.0, 2 * trial + 1).unwrap();
            let x = synth::sample_irregular(&path_x, 10_000, 1000 + trial, "x").unwrap();
            let y = synth::sample_irregular(&path_y, 10_000, 2000 + trial, "y").unwrap();
            let c = hy_lagged_correlogram(&x, &y, &lags).unwrap();
            if c.max_abs() < 0.15 {
                ok += 1;
            }
        }
        assert!(ok >= 90, "{ok}/100");
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = Summary::of(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn experiment_guards() {
        let cfg = LocfExperiment { ratio: 0.5, ..Default::default() };
        assert!(locf_llr_experiment(&cfg).is_err());
        let cfg = LocfExperiment { trials: 10, ..Default::default() };
        assert!(matches!(locf_llr_experiment(&cfg), Err(Error::TooFewTrials { .. })));
    }

    fn series_strategy() -> impl Strategy<Value = IrregularSeries> {
        prop::collection::vec((0.01f64..1.0, -2.0f64..2.0), 2..60).prop_map(|steps| {
            let mut t = 0.0;
            let (ts, vs): (Vec<f64>, Vec<f64>) = steps
                .into_iter()
                .map(|(dt, v)| {
                    t += dt;
                    (t, v)
                })
                .unzip();
            IrregularSeries::new("s", ts, vs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sweep_matches_brute_force(x in series_strategy(), y in series_strategy()) {
            if let Ok(fast) = hy_covariance(&x, &y) {
                let slow = hy_brute(&x, &y);
                prop_assert!((fast - slow).abs() < 1e-12 * (1.0 + slow.abs()));
                prop_assert_eq!(fast, hy_covariance(&y, &x).unwrap());
            }
        }
    }

    #[test]
    fn sweep_matches_brute_force_large() {
        let path = synth::fbm_path(0.5, 20_000, 1.0, 5).unwrap();
        let x = synth::sample_irregular(&path, 1000, 6, "x").unwrap();
        let y = synth::sample_irregular(&path, 1000, 7, "y").unwrap();
        let fast = hy_covariance(&x, &y).unwrap();
        let slow = hy_brute(&x, &y);
        assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0));
    }
}
