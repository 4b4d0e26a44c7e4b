//! Direct Fourier projection of irregular observations, cross-spectra and
//! their inversion into a normalized cross-correlogram.
//!
//! Projection is a plain sum over observations,
//! `P(f) = sum_n x(t_n) exp(-i f t_n)`, so it needs no sorting, no
//! interpolation and splits into mergeable partial sums.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{stdev, CrossCorrelogram, FrequencyGrid, IrregularSeries, LagGrid};

/// Observations per block in the projection kernel.
const BLOCK: usize = 256;
/// Phasors are recomputed exactly every this many frequency steps so the
/// multiplicative recurrence cannot drift.
const ANCHOR_EVERY: usize = 64;

/// Coefficients of one series on a frequency grid; `coeffs[l - 1]` holds
/// frequency `l * delta_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProjection {
    grid: FrequencyGrid,
    coeffs: Vec<Complex64>,
    n_obs: usize,
    label: String,
}

impl FourierProjection {
    pub fn new(
        label: impl Into<String>,
        grid: FrequencyGrid,
        coeffs: Vec<Complex64>,
        n_obs: usize,
    ) -> Result<Self> {
        if coeffs.len() != grid.count() {
            return Err(Error::LengthMismatch { left: coeffs.len(), right: grid.count() });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FourierProjection { grid, coeffs, n_obs, label: label.into() })
    }

    pub fn zero(label: impl Into<String>, grid: FrequencyGrid) -> Self {
        FourierProjection {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.count()],
            n_obs: 0,
            label: label.into(),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Multiply every coefficient by `factor(l, f_l)`.
    pub fn map_coeffs(&self, factor: impl Fn(usize, f64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * factor(i + 1, self.grid.frequency(i + 1)))
            .collect();
        FourierProjection { grid: self.grid, coeffs, n_obs: self.n_obs, label: self.label.clone() }
    }

    /// Wire size of [`FourierProjection::to_bytes`] for a label of
    /// `label_bytes` bytes and `count` coefficients.
    pub fn encoded_len(label_bytes: usize, count: usize) -> usize {
        signature_header_len(label_bytes) + 16 * count
    }

    /// Little-endian record: `u32` label length, label bytes, `f64` delta_f,
    /// `u64` P, `u64` n_obs, then P pairs of `f64` (re, im).
    pub fn to_bytes(&self) -> Vec<u8> {
        let label = self.label.as_bytes();
        let mut out = Vec::with_capacity(Self::encoded_len(label.len(), self.coeffs.len()));
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label);
        out.extend_from_slice(&self.grid.delta_f().to_le_bytes());
        out.extend_from_slice(&(self.grid.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_obs as u64).to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let label_len = u32::from_le_bytes(cur.take::<4>()?) as usize;
        let label = std::str::from_utf8(cur.slice(label_len)?)
            .map_err(|e| Error::Decode(format!("label is not UTF-8: {e}")))?
            .to_string();
        let delta_f = f64::from_le_bytes(cur.take::<8>()?);
        let count = u64::from_le_bytes(cur.take::<8>()?) as usize;
        let n_obs = u64::from_le_bytes(cur.take::<8>()?) as usize;
        let grid = FrequencyGrid::new(delta_f, count).map_err(|e| Error::Decode(e.to_string()))?;
        if bytes.len() - cur.pos != 16 * count {
            return Err(Error::Decode(format!(
                "expected {} coefficient bytes, found {}",
                16 * count,
                bytes.len() - cur.pos
            )));
        }
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64::from_le_bytes(cur.take::<8>()?);
            let im = f64::from_le_bytes(cur.take::<8>()?);
            coeffs.push(Complex64::new(re, im));
        }
        FourierProjection::new(label, grid, coeffs, n_obs)
    }
}

pub fn signature_header_len(label_bytes: usize) -> usize {
    4 + label_bytes + 8 + 8 + 8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Decode("record truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.slice(N)?.try_into().expect("slice has length N"))
    }
}

/// Element-wise `P_x(f) * conj(P_y(f))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl CrossSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::LengthMismatch { left: values.len(), right: grid.count() });
        }
        if let Some(index) = values.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(CrossSpectrum { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(1/P) sum_l Re I(f_l)`, the zero-lag autocovariance of an auto-spectrum.
    pub fn mean_real(&self) -> f64 {
        self.values.iter().map(|c| c.re).sum::<f64>() / self.values.len() as f64
    }
}

/// Sum `values[n] * exp(-i l delta_f t_n)` for `l = 1..=P` without any
/// centering check. Blocks are reduced in a fixed order, so the result does
/// not depend on the thread count.
pub fn project_values(
    label: impl Into<String>,
    timestamps: &[f64],
    values: &[f64],
    grid: &FrequencyGrid,
) -> Result<FourierProjection> {
    if timestamps.len() != values.len() {
        return Err(Error::LengthMismatch { left: timestamps.len(), right: values.len() });
    }
    let bad = |xs: &[f64]| xs.iter().position(|v| !v.is_finite());
    if let Some(index) = bad(values).or_else(|| bad(timestamps)) {
        return Err(Error::NonFinite { index });
    }
    let p = grid.count();
    let partials: Vec<Vec<Complex64>> = timestamps
        .par_chunks(BLOCK * 16)
        .zip(values.par_chunks(BLOCK * 16))
        .map(|(ts, vs)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); p];
            for (tb, vb) in ts.chunks(BLOCK).zip(vs.chunks(BLOCK)) {
                accumulate_block(tb, vb, grid.delta_f(), &mut acc);
            }
            acc
        })
        .collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); p];
    for part in &partials {
        for (c, q) in coeffs.iter_mut().zip(part) {
            *c += q;
        }
    }
    FourierProjection::new(label, *grid, coeffs, values.len())
}

fn accumulate_block(ts: &[f64], vs: &[f64], delta_f: f64, acc: &mut [Complex64]) {
    let n = ts.len();
    let (mut zr, mut zi) = (vec![0.0; n], vec![0.0; n]);
    let (mut wr, mut wi) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let (s, c) = (-delta_f * ts[j]).sin_cos();
        wr[j] = c;
        wi[j] = s;
    }
    for l in 1..=acc.len() {
        if (l - 1) % ANCHOR_EVERY == 0 {
            let f = l as f64 * delta_f;
            for j in 0..n {
                let (s, c) = (-f * ts[j]).sin_cos();
                zr[j] = c;
                zi[j] = s;
            }
        }
        let (re, im) = dot2(vs, &zr, &zi);
        acc[l - 1] += Complex64::new(re, im);
        for j in 0..n {
            let r = zr[j] * wr[j] - zi[j] * wi[j];
            let i = zr[j] * wi[j] + zi[j] * wr[j];
            zr[j] = r;
            zi[j] = i;
        }
    }
}

/// `(sum v*a, sum v*b)` with four independent lanes.
fn dot2(v: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut sa = [0.0; 4];
    let mut sb = [0.0; 4];
    let chunks = v.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            let j = 4 * c + k;
            sa[k] += v[j] * a[j];
            sb[k] += v[j] * b[j];
        }
    }
    let mut ra = (sa[0] + sa[1]) + (sa[2] + sa[3]);
    let mut rb = (sb[0] + sb[1]) + (sb[2] + sb[3]);
    for j in 4 * chunks..v.len() {
        ra += v[j] * a[j];
        rb += v[j] * b[j];
    }
    (ra, rb)
}

/// Project a centered series onto `grid`.
pub fn project(s: &IrregularSeries, grid: &FrequencyGrid) -> Result<FourierProjection> {
    let mean = s.mean();
    let limit = 1e-9 * stdev(s.values());
    if mean.abs() > limit {
        return Err(Error::NotCentered { mean, limit });
    }
    project_values(s.label(), s.timestamps(), s.values(), grid)
}

/// Sum two partial projections of the same series.
pub fn merge(a: &FourierProjection, b: &FourierProjection) -> Result<FourierProjection> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    if a.label != b.label {
        return Err(Error::LabelMismatch(a.label.clone(), b.label.clone()));
    }
    let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
    Ok(FourierProjection { grid: a.grid, coeffs, n_obs: a.n_obs + b.n_obs, label: a.label.clone() })
}

pub fn cross_spectrum(px: &FourierProjection, py: &FourierProjection) -> Result<CrossSpectrum> {
    if px.grid != py.grid {
        return Err(Error::GridMismatch);
    }
    let values = px.coeffs.iter().zip(&py.coeffs).map(|(x, y)| x * y.conj()).collect();
    Ok(CrossSpectrum { grid: px.grid, values })
}

/// Moving average over `2m + 1` neighbouring frequencies, truncated at the
/// grid edges.
pub fn smooth(spec: &CrossSpectrum, half_width: usize) -> Result<CrossSpectrum> {
    let p = spec.values.len();
    if 2 * half_width >= p {
        return Err(Error::WindowTooWide { half_width, count: p });
    }
    if half_width == 0 {
        return Ok(spec.clone());
    }
    let mut prefix = Vec::with_capacity(p + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for v in &spec.values {
        let last = *prefix.last().unwrap();
        prefix.push(last + v);
    }
    let values = (0..p)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width).min(p - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect();
    Ok(CrossSpectrum { grid: spec.grid, values })
}

/// Inverse transform of a cross-spectrum into rho on `lags`.
///
/// `gamma(h) = (1/P) sum_l Re[I(f_l) exp(-i f_l h)]`, normalized by the
/// zero-lag autocovariances of the two auto-spectra. With this sign a
/// series `y` that repeats `x` after a delay `d` peaks at `h = +d`, the
/// same orientation as `gamma(h) = E[x(t-h) y(t)]`.
pub fn invert_to_correlogram(
    cross: &CrossSpectrum,
    auto_x: &CrossSpectrum,
    auto_y: &CrossSpectrum,
    lags: &LagGrid,
) -> Result<CrossCorrelogram> {
    if cross.grid != auto_x.grid || cross.grid != auto_y.grid {
        return Err(Error::GridMismatch);
    }
    let gxx = auto_x.mean_real();
    let gyy = auto_y.mean_real();
    for g in [gxx, gyy] {
        if !(g > 0.0) {
            return Err(Error::DegenerateVariance(g));
        }
    }
    let norm = (gxx * gyy).sqrt();
    let p = cross.values.len() as f64;
    let mut rho = Vec::with_capacity(lags.len());
    let mut residual = 0.0f64;
    for h in lags.lags() {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in cross.values.iter().enumerate() {
            let (s, c) = (cross.grid.frequency(i + 1) * h).sin_cos();
            // v * exp(-i f h)
            re += v.re * c + v.im * s;
            im += v.im * c - v.re * s;
        }
        rho.push(re / p / norm);
        residual = residual.max((im / p / norm).abs());
    }
    CrossCorrelogram::new(*lags, rho, residual)
}
