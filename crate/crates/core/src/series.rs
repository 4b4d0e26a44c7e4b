//! Shared domain types: observation series, frequency and lag grids, and
//! the cross-correlogram that every estimator produces.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerance on |rho| above one that the Fourier estimator can reach through
/// rounding alone.
pub const NORM_EPS: f64 = 1e-6;

/// Observations of one process at strictly increasing, irregular timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularSeries {
    label: String,
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl IrregularSeries {
    pub fn new(label: impl Into<String>, timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch { left: timestamps.len(), right: values.len() });
        }
        if timestamps.len() < 2 {
            return Err(Error::EmptySeries(timestamps.len()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = timestamps.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing { index: w + 1 });
        }
        Ok(IrregularSeries { label: label.into(), timestamps, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn last_time(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.last_time() - self.first_time()
    }

    pub fn mean_gap(&self) -> f64 {
        self.span() / (self.len() - 1) as f64
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same observations with every timestamp moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        IrregularSeries {
            label: self.label.clone(),
            timestamps: self.timestamps.iter().map(|t| t + delta).collect(),
            values: self.values.clone(),
        }
    }

    /// Changes since the previous observation, stamped at the later time.
    pub fn increments(&self) -> Result<Self> {
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        IrregularSeries::new(self.label.clone(), self.timestamps[1..].to_vec(), values)
    }

    /// Observations with `start <= t <= end`.
    pub fn window(&self, start: f64, end: f64) -> Result<Self> {
        let (ts, vs): (Vec<f64>, Vec<f64>) = self
            .timestamps
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= start && **t <= end)
            .map(|(t, v)| (*t, *v))
            .unzip();
        if ts.len() < 2 {
            return Err(Error::EmptySeries(ts.len()));
        }
        IrregularSeries::new(self.label.clone(), ts, vs)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.values.iter().copied())
    }
}

/// A series on the grid `start + n * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSeries {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl RegularSeries {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::param("step", format!("must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(Error::param("start", "must be finite"));
        }
        if values.len() < 2 {
            return Err(Error::EmptySeries(values.len()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(RegularSeries { start, step, values })
    }

    /// Path `0, d0, d0 + d1, ...` built from increments.
    pub fn integrate(start: f64, step: f64, increments: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        values.push(acc);
        for d in increments {
            acc += d;
            values.push(acc);
        }
        RegularSeries::new(start, step, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn same_grid(&self, other: &RegularSeries) -> bool {
        self.start == other.start && self.step == other.step && self.len() == other.len()
    }

    /// First differences on the same step, starting one step later.
    pub fn diff(&self) -> Result<Self> {
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        RegularSeries::new(self.start + self.step, self.step, values)
    }

    pub fn to_irregular(&self, label: impl Into<String>) -> Result<IrregularSeries> {
        let ts = (0..self.len()).map(|n| self.time(n)).collect();
        IrregularSeries::new(label, ts, self.values.clone())
    }
}

/// Positive frequencies `l * delta_f` for `l = 1..=count`; zero is never on
/// the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    delta_f: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(delta_f: f64, count: usize) -> Result<Self> {
        if !(delta_f > 0.0) || !delta_f.is_finite() {
            return Err(Error::param("delta_f", format!("must be positive, got {delta_f}")));
        }
        if count < 2 {
            return Err(Error::param("projections", format!("grid requires P >= 2, got {count}")));
        }
        Ok(FrequencyGrid { delta_f, count })
    }

    /// Fundamental frequency `2 pi / span`.
    pub fn from_span(span: f64, count: usize) -> Result<Self> {
        if !(span > 0.0) {
            return Err(Error::param("span", format!("must be positive, got {span}")));
        }
        FrequencyGrid::new(2.0 * PI / span, count)
    }

    /// Spacing such that the inverse transform resolves lags of `lag_step`,
    /// i.e. `count * delta_f * lag_step = 2 pi`.
    pub fn for_resolution(lag_step: f64, count: usize) -> Result<Self> {
        if !(lag_step > 0.0) {
            return Err(Error::param("lag_step", format!("must be positive, got {lag_step}")));
        }
        FrequencyGrid::new(2.0 * PI / (count as f64 * lag_step), count)
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Frequency of bin `l` (1-based).
    pub fn frequency(&self, l: usize) -> f64 {
        l as f64 * self.delta_f
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.count).map(move |l| self.frequency(l))
    }

    /// Lag step at which the inverse transform's Dirichlet kernel vanishes
    /// on every nonzero grid point.
    pub fn natural_lag_step(&self) -> f64 {
        2.0 * PI / (self.count as f64 * self.delta_f)
    }
}

/// Symmetric lags `k * delta_h` for `k = -half_count..=half_count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagGrid {
    delta_h: f64,
    half_count: usize,
}

impl LagGrid {
    pub fn new(delta_h: f64, half_count: usize) -> Result<Self> {
        if !(delta_h > 0.0) || !delta_h.is_finite() {
            return Err(Error::param("delta_h", format!("must be positive, got {delta_h}")));
        }
        if half_count == 0 {
            return Err(Error::param("lags", "need at least one lag on each side"));
        }
        Ok(LagGrid { delta_h, half_count })
    }

    pub fn delta_h(&self) -> f64 {
        self.delta_h
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn len(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `h = 0`.
    pub fn zero_index(&self) -> usize {
        self.half_count
    }

    /// Signed step count of position `i`.
    pub fn step_at(&self, i: usize) -> i64 {
        i as i64 - self.half_count as i64
    }

    pub fn lag(&self, i: usize) -> f64 {
        self.step_at(i) as f64 * self.delta_h
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.lag(i))
    }
}

/// Estimated cross-correlation on a symmetric lag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelogram {
    lag_grid: LagGrid,
    rho: Vec<f64>,
    imag_residual: f64,
}

impl CrossCorrelogram {
    pub fn new(lag_grid: LagGrid, rho: Vec<f64>, imag_residual: f64) -> Result<Self> {
        if rho.len() != lag_grid.len() {
            return Err(Error::LengthMismatch { left: rho.len(), right: lag_grid.len() });
        }
        if let Some(index) = rho.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(imag_residual >= 0.0) {
            return Err(Error::param("imag_residual", "must be nonnegative"));
        }
        Ok(CrossCorrelogram { lag_grid, rho, imag_residual })
    }

    pub fn lag_grid(&self) -> &LagGrid {
        &self.lag_grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    pub fn rho_at_zero(&self) -> f64 {
        self.rho[self.lag_grid.zero_index()]
    }

    pub fn max_abs(&self) -> f64 {
        self.rho.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Whether every value satisfies `|rho| <= 1 + NORM_EPS`.
    pub fn within_unit_bound(&self) -> bool {
        self.max_abs() <= 1.0 + NORM_EPS
    }

    /// Index of the largest rho; ties go to the smallest |h|, then to h > 0.
    pub fn argmax(&self) -> usize {
        let mut best = self.lag_grid.zero_index();
        for i in 0..self.rho.len() {
            let (r, b) = (self.rho[i], self.rho[best]);
            let (si, sb) = (self.lag_grid.step_at(i), self.lag_grid.step_at(best));
            let better = r > b
                || (r == b && (si.abs() < sb.abs() || (si.abs() == sb.abs() && si > sb)));
            if better {
                best = i;
            }
        }
        best
    }

    /// Correlogram of the swapped pair: `h -> -h`.
    pub fn reversed(&self) -> Self {
        let mut rho = self.rho.clone();
        rho.reverse();
        CrossCorrelogram { lag_grid: self.lag_grid, rho, imag_residual: self.imag_residual }
    }

    pub fn scaled(&self, c: f64) -> Self {
        CrossCorrelogram {
            lag_grid: self.lag_grid,
            rho: self.rho.iter().map(|r| r * c).collect(),
            imag_residual: self.imag_residual * c.abs(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lag_grid.lags().zip(self.rho.iter().copied())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn stdev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sort raw observations by time; on duplicated timestamps the last
/// occurrence in input order wins.
pub fn dedup_and_sort(label: impl Into<String>, raw: &[(f64, f64)]) -> Result<IrregularSeries> {
    if let Some(index) = raw.iter().position(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut order: Vec<usize> = (0..raw.len()).collect();
    // stable: equal timestamps stay in input order
    order.sort_by(|&a, &b| raw[a].0.total_cmp(&raw[b].0));
    let mut ts: Vec<f64> = Vec::with_capacity(raw.len());
    let mut vs: Vec<f64> = Vec::with_capacity(raw.len());
    for i in order {
        let (t, v) = raw[i];
        match ts.last() {
            Some(&last) if last == t => *vs.last_mut().unwrap() = v,
            _ => {
                ts.push(t);
                vs.push(v);
            }
        }
    }
    if ts.len() < 2 {
        return Err(Error::EmptySeries(ts.len()));
    }
    IrregularSeries::new(label, ts, vs)
}

pub fn demean(s: &IrregularSeries) -> IrregularSeries {
    let m = s.mean();
    IrregularSeries {
        label: s.label.clone(),
        timestamps: s.timestamps.clone(),
        values: s.values.iter().map(|v| v - m).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dedup_keeps_last_occurrence() {
        let s = dedup_and_sort("x", &[(0.0, 1.0), (0.0, 2.0), (1.0, 3.0)]).unwrap();
        assert_eq!(s.timestamps(), &[0.0, 1.0]);
        assert_eq!(s.values(), &[2.0, 3.0]);
    }

    #[test]
    fn dedup_sorts() {
        let s = dedup_and_sort("x", &[(1.0, 5.0), (0.0, 4.0)]).unwrap();
        assert_eq!(s.timestamps(), &[0.0, 1.0]);
        assert_eq!(s.values(), &[4.0, 5.0]);
    }

    #[test]
    fn dedup_rejects_short_and_nan() {
        assert!(matches!(dedup_and_sort("x", &[(0.0, 1.0)]), Err(Error::EmptySeries(1))));
        assert!(matches!(
            dedup_and_sort("x", &[(0.0, 1.0), (0.0, 2.0)]),
            Err(Error::EmptySeries(1))
        ));
        assert!(matches!(
            dedup_and_sort("x", &[(0.0, 1.0), (1.0, f64::NAN)]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn demean_examples() {
        let s = IrregularSeries::new("x", vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(demean(&s).values(), &[-1.0, 1.0]);
        let s = IrregularSeries::new("x", vec![0.0, 1.0, 2.0], vec![5.0; 3]).unwrap();
        assert_eq!(demean(&s).values(), &[0.0; 3]);
        let s = IrregularSeries::new("x", vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(demean(&s).values(), &[0.0, 0.0]);
    }

    #[test]
    fn series_invariants_enforced() {
        assert!(IrregularSeries::new("x", vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(IrregularSeries::new("x", vec![0.0], vec![1.0]).is_err());
        assert!(RegularSeries::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(FrequencyGrid::new(1.0, 1).is_err());
        assert!(FrequencyGrid::new(0.0, 10).is_err());
        assert!(LagGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn lag_grid_is_symmetric() {
        let g = LagGrid::new(0.5, 3).unwrap();
        let lags: Vec<f64> = g.lags().collect();
        assert_eq!(lags, vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
        assert_eq!(g.lag(g.zero_index()), 0.0);
    }

    #[test]
    fn argmax_tie_break() {
        let g = LagGrid::new(1.0, 2).unwrap();
        let c = CrossCorrelogram::new(g, vec![0.5, 1.0, 0.2, 1.0, 0.5], 0.0).unwrap();
        assert_eq!(g.step_at(c.argmax()), 1);
        let c = CrossCorrelogram::new(g, vec![1.0, 0.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(g.step_at(c.argmax()), 2);
        let c = CrossCorrelogram::new(g, vec![0.3, 0.0, 0.3, 0.0, 0.3], 0.0).unwrap();
        assert_eq!(g.step_at(c.argmax()), 0);
    }

    fn raw_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0u32..50, -1e3f64..1e3), 2..60)
            .prop_map(|v| v.into_iter().map(|(t, x)| (t as f64 * 0.25, x)).collect())
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent(raw in raw_strategy()) {
            if let Ok(once) = dedup_and_sort("x", &raw) {
                let pairs: Vec<_> = once.pairs().collect();
                let twice = dedup_and_sort("x", &pairs).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn dedup_ignores_order_for_distinct_times(
            raw in prop::collection::btree_map(0u32..500, -1e3f64..1e3, 2..60),
            seed in any::<u64>(),
        ) {
            let raw: Vec<(f64, f64)> = raw.into_iter().map(|(t, x)| (t as f64, x)).collect();
            let mut shuffled = raw.clone();
            // deterministic Fisher-Yates from the seed
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(dedup_and_sort("x", &raw).unwrap(), dedup_and_sort("x", &shuffled).unwrap());
        }

        #[test]
        fn demean_is_idempotent(values in prop::collection::vec(-1e6f64..1e6, 2..100)) {
            let ts = (0..values.len()).map(|i| i as f64).collect();
            let s = IrregularSeries::new("x", ts, values).unwrap();
            let once = demean(&s);
            let twice = demean(&once);
            let scale = s.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(once.mean().abs() <= 1e-12 * scale * 10.0);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale * 10.0);
            }
        }
    }
}
