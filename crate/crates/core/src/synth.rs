//! Seeded generators: fractional Gaussian noise by circulant embedding,
//! correlated pairs, exponential causal kernels and irregular sampling of
//! fine-grid paths.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::series::{IrregularSeries, RegularSeries};

/// Tolerance for negative circulant eigenvalues, relative to the largest.
const EMBEDDING_TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo trial `trial`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

/// Independent sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Autocovariance of unit-variance fGn at integer lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param("hurst", format!("must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

/// `n` unit-variance fractional Gaussian noise increments.
pub fn simulate_fgn(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_hurst(hurst)?;
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 increments, got {n}")));
    }
    let m = 2 * n;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex64::new(fgn_autocovariance(hurst, k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut buf);

    let largest = buf.iter().fold(0.0f64, |a, z| a.max(z.re));
    let smallest = buf.iter().fold(f64::INFINITY, |a, z| a.min(z.re));
    if smallest < -EMBEDDING_TOL * largest {
        return Err(Error::EmbeddingFailure(smallest));
    }

    let mut rng = rng(seed);
    let scale = 1.0 / (m as f64).sqrt();
    for z in buf.iter_mut() {
        let amp = z.re.max(0.0).sqrt() * scale;
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(a * amp, b * amp);
    }
    fft.process(&mut buf);
    Ok(buf[..n].iter().map(|z| z.re).collect())
}

/// Two fGn sequences with instantaneous increment correlation `rho`.
pub fn correlated_pair(hurst: f64, rho: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::param("rho", format!("must lie in [-1, 1], got {rho}")));
    }
    let a = simulate_fgn(hurst, n, derive_seed(seed, 1))?;
    let b = simulate_fgn(hurst, n, derive_seed(seed, 2))?;
    let c = (1.0 - rho * rho).sqrt();
    let second = a.iter().zip(&b).map(|(x, e)| rho * x + c * e).collect();
    Ok((a, second))
}

/// fBm path on `start + k * step`, starting at zero, from `n` increments.
pub fn fbm_path(hurst: f64, n: usize, step: f64, seed: u64) -> Result<RegularSeries> {
    let scale = step.powf(hurst);
    let incs: Vec<f64> = simulate_fgn(hurst, n, seed)?.into_iter().map(|d| d * scale).collect();
    RegularSeries::integrate(0.0, step, &incs)
}

/// Exponential causation kernel: zero before the delay `tau`, then
/// `alpha * exp(-beta * (t - tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalKernel {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CausalKernel {
    pub fn new(tau: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", format!("must be >= 0, got {tau}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::param("beta", format!("must be >= 0, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        Ok(CausalKernel { tau, alpha, beta })
    }

    /// Kernel whose long-window gain `alpha / beta` gives increment
    /// correlation `rho` against unit-amplitude innovation noise.
    pub fn for_correlation(tau: f64, beta: f64, rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) || beta <= 0.0 {
            return Err(Error::param("rho", "need |rho| < 1 and beta > 0"));
        }
        let gain = rho / (1.0 - rho * rho).sqrt();
        CausalKernel::new(tau, gain * beta, beta)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < self.tau {
            0.0
        } else {
            self.alpha * (-self.beta * (t - self.tau)).exp()
        }
    }
}

/// Increments of `Y` driven by `X` through `kernel`:
/// `dY_n = noise * dW_n + sum_k phi(k * step) * dX_{n-k} * step`,
/// with `dW_n ~ N(0, step)`.
///
/// The exponential kernel makes the convolution a first-order recursion,
/// so it is evaluated exactly in O(n).
pub fn kernel_drive(
    x_increments: &[f64],
    kernel: &CausalKernel,
    step: f64,
    noise_amplitude: f64,
    noise_seed: u64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    let first_tap = ((kernel.tau / step) - 1e-9).ceil().max(0.0) as usize;
    let lead_weight = kernel.value(first_tap as f64 * step) * step;
    let decay = (-kernel.beta * step).exp();
    let mut rng = rng(noise_seed);
    let sd = step.sqrt() * noise_amplitude;

    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x_increments.len());
    for n in 0..x_increments.len() {
        let driven = if n >= first_tap { x_increments[n - first_tap] } else { 0.0 };
        acc = driven + decay * acc;
        let noise: f64 = rng.sample(StandardNormal);
        out.push(lead_weight * acc + sd * noise);
    }
    Ok(out)
}

/// Observe a fine-grid path at `n_obs` uniform random times snapped to the
/// grid. Collisions are dropped, so fewer points may come back. Asking for
/// every grid point returns the whole path.
pub fn sample_irregular(
    path: &RegularSeries,
    n_obs: usize,
    seed: u64,
    label: &str,
) -> Result<IrregularSeries> {
    if n_obs < 2 || n_obs > path.len() {
        return Err(Error::param(
            "n_obs",
            format!("must lie in [2, {}], got {n_obs}", path.len()),
        ));
    }
    if n_obs == path.len() {
        return path.to_irregular(label);
    }
    let last = (path.len() - 1) as f64;
    let mut rng = rng(seed);
    let mut idx: Vec<usize> = (0..n_obs)
        .map(|_| (rng.random::<f64>() * last).round() as usize)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    if idx.len() < 2 {
        return Err(Error::EmptySeries(idx.len()));
    }
    let ts = idx.iter().map(|&i| path.time(i)).collect();
    let vs = idx.iter().map(|&i| path.values()[i]).collect();
    IrregularSeries::new(label, ts, vs)
}

/// Noisy copy of `s` delayed by `tau`: timestamps move to `t + tau` and
/// each value gets independent Gaussian noise of standard deviation
/// `noise_sd`.
pub fn lagged_copy(s: &IrregularSeries, tau: f64, noise_sd: f64, seed: u64, label: &str) -> Result<IrregularSeries> {
    let mut rng = rng(seed);
    let values = s
        .values()
        .iter()
        .map(|v| {
            let e: f64 = rng.sample(StandardNormal);
            v + noise_sd * e
        })
        .collect();
    IrregularSeries::new(label, s.timestamps().iter().map(|t| t + tau).collect(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        c1 / c0
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn white_noise_at_half() {
        let n = 1 << 16;
        let x = simulate_fgn(0.5, n, 7).unwrap();
        assert!(lag1_autocorr(&x).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn lag1_correlation_matches_closed_form() {
        let expected = 0.5 * (2f64.powf(1.6) - 2.0);
        assert!((fgn_autocovariance(0.8, 1) - expected).abs() < 1e-15);
        assert!((expected - 0.5157).abs() < 1e-4);
        let x = simulate_fgn(0.8, 1 << 16, 11).unwrap();
        let r1 = lag1_autocorr(&x);
        assert!((r1 - expected).abs() < 0.02, "r1 = {r1}");
    }

    #[test]
    fn seeds_are_deterministic() {
        assert_eq!(simulate_fgn(0.7, 1000, 3).unwrap(), simulate_fgn(0.7, 1000, 3).unwrap());
        assert_ne!(simulate_fgn(0.7, 1000, 3).unwrap(), simulate_fgn(0.7, 1000, 4).unwrap());
    }

    #[test]
    fn fbm_variance_scaling() {
        // log-variance regression over dyadic horizons, pooled over paths
        let hurst = 0.7;
        let n = 1 << 16;
        let mut logs = Vec::new();
        let paths: Vec<Vec<f64>> = (0..8)
            .map(|s| {
                let d = simulate_fgn(hurst, n, 100 + s).unwrap();
                let mut acc = 0.0;
                d.iter().map(|v| { acc += v; acc }).collect()
            })
            .collect();
        for j in 0..10 {
            let lag = 1usize << j;
            let mut sq = 0.0;
            let mut count = 0.0;
            for p in &paths {
                for w in p.windows(lag + 1).step_by(lag) {
                    let d = w[lag] - w[0];
                    sq += d * d;
                    count += 1.0;
                }
            }
            logs.push(((lag as f64).ln(), (sq / count).ln()));
        }
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0 * hurst).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn correlated_pair_examples() {
        let (a, b) = correlated_pair(0.6, 1.0, 500, 1).unwrap();
        assert_eq!(a, b);
        let n = 1 << 16;
        let (a, b) = correlated_pair(0.5, 0.0, n, 2).unwrap();
        assert!(corr(&a, &b).abs() < 3.0 / (n as f64).sqrt());
        let (a, b) = correlated_pair(0.5, 0.91, n, 3).unwrap();
        assert!((corr(&a, &b) - 0.91).abs() < 0.02);
        assert!(correlated_pair(0.5, 1.5, 10, 0).is_err());
    }

    #[test]
    fn kernel_is_causal() {
        let k = CausalKernel::new(0.013, 2.0, 200.0).unwrap();
        assert_eq!(k.value(0.012), 0.0);
        assert_eq!(k.value(0.013), 2.0);
        assert!((k.value(0.018) - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_gives_pure_noise() {
        let n = 1 << 15;
        let x = simulate_fgn(0.5, n, 5).unwrap();
        let k = CausalKernel::new(0.0, 0.0, 10.0).unwrap();
        let y = kernel_drive(&x, &k, 1.0, 1.0, 6).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for lag in 0..20 {
            let r = corr(&x[..n - lag], &y[lag..]);
            assert!(r.abs() < bound, "lag {lag}: {r}");
        }
    }

    #[test]
    fn flat_kernel_integrates_driver() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let k = CausalKernel::new(0.0, 1.0, 0.0).unwrap();
        let step = 0.1;
        let y = kernel_drive(&x, &k, step, 0.0, 0).unwrap();
        let mut run = 0.0;
        for (xi, yi) in x.iter().zip(&y) {
            run += xi * step;
            assert!((yi - run).abs() < 1e-15);
        }
    }

    #[test]
    fn recursion_matches_direct_convolution() {
        let x = simulate_fgn(0.5, 400, 9).unwrap();
        let step = 0.001;
        let k = CausalKernel::new(0.013, 300.0, 200.0).unwrap();
        let y = kernel_drive(&x, &k, step, 0.0, 0).unwrap();
        for n in [0, 12, 13, 14, 100, 399] {
            let direct: f64 = (0..=n).map(|j| k.value(j as f64 * step) * x[n - j] * step).sum();
            assert!((y[n] - direct).abs() < 1e-12, "n={n}: {} vs {direct}", y[n]);
        }
    }

    #[test]
    fn kernel_pair_peaks_at_delay() {
        // brute-force cross-correlation of increments on the fine grid
        let n = 1 << 17;
        let step: f64 = 0.001;
        let x = simulate_fgn(0.5, n, 21).unwrap();
        let x: Vec<f64> = x.iter().map(|v| v * step.sqrt()).collect();
        let k = CausalKernel::for_correlation(0.013, 200.0, 0.9).unwrap();
        let y = kernel_drive(&x, &k, step, 1.0, 22).unwrap();
        // aggregate to 2 ms bins so the kernel mass is visible over the noise
        let agg = |v: &[f64]| v.chunks(2).map(|c| c.iter().sum::<f64>()).collect::<Vec<_>>();
        let (xa, ya) = (agg(&x), agg(&y));
        let best = (0..15)
            .max_by(|&a, &b| {
                let ra = corr(&xa[..xa.len() - a], &ya[a..]);
                let rb = corr(&xa[..xa.len() - b], &ya[b..]);
                ra.total_cmp(&rb)
            })
            .unwrap();
        let lag_seconds = best as f64 * 2.0 * step;
        assert!((0.012..=0.016).contains(&lag_seconds), "peak at {lag_seconds}");
    }

    #[test]
    fn sampling_examples() {
        let path = RegularSeries::new(0.0, 1.0, (0..50).map(|i| i as f64).collect()).unwrap();
        let full = sample_irregular(&path, 50, 1, "x").unwrap();
        assert_eq!(full.len(), 50);
        assert_eq!(full.values(), path.values());
        let two = sample_irregular(&path, 2, 3, "x");
        if let Ok(s) = two {
            assert_eq!(s.len(), 2);
            assert!(s.timestamps()[0] < s.timestamps()[1]);
        }
        let big = RegularSeries::new(0.0, 1.0, vec![0.0; 1 << 17]).unwrap();
        let s = sample_irregular(&big, 9998, 4, "x").unwrap();
        assert!((9500..=9998).contains(&s.len()), "{}", s.len());
    }

    #[test]
    fn birthday_count_matches_simulation() {
        // direct simulation of the collision count as the oracle
        let m = 1usize << 17;
        let mut rng = rng(77);
        let mut total = 0usize;
        for _ in 0..20 {
            let mut hit = vec![false; m];
            for _ in 0..9998 {
                hit[(rng.random::<f64>() * (m - 1) as f64).round() as usize] = true;
            }
            total += hit.iter().filter(|h| **h).count();
        }
        let avg = total as f64 / 20.0;
        assert!((9500.0..=9998.0).contains(&avg), "{avg}");
    }
}
