//! Python bindings. Series and spectra cross the boundary as plain lists
//! of floats; settings as `str -> str` dicts in the `key=value` vocabulary
//! of the command-line tool.

use std::collections::HashMap;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use xcausal::causal::{llr_with_threshold, DEFAULT_THETA};
use xcausal::config::ExperimentConfig;
use xcausal::lrd::HurstEstimate;
use xcausal::parallel::{self, ParallelOptions};
use xcausal::pipeline::{self, Detrend, Erasure, FourierOptions};
use xcausal::{baselines, experiments, spectral, ErrorClass};

fn py_err(e: xcausal::Error) -> PyErr {
    match e.class() {
        ErrorClass::Numerical => PyArithmeticError::new_err(e.to_string()),
        ErrorClass::Config | ErrorClass::Data => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for xcausal::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "IrregularSeries", module = "xcausal", frozen, from_py_object)]
#[derive(Clone)]
struct Series {
    inner: xcausal::IrregularSeries,
}

#[pymethods]
impl Series {
    #[new]
    fn new(label: String, timestamps: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Ok(Series { inner: xcausal::IrregularSeries::new(label, timestamps, values).py()? })
    }

    /// Sort by time and keep the last value of repeated timestamps.
    #[staticmethod]
    fn from_unsorted(label: String, timestamps: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        if timestamps.len() != values.len() {
            return Err(PyValueError::new_err("timestamps and values differ in length"));
        }
        let raw: Vec<(f64, f64)> = timestamps.into_iter().zip(values).collect();
        Ok(Series { inner: xcausal::dedup_and_sort(label, &raw).py()? })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn timestamps(&self) -> Vec<f64> {
        self.inner.timestamps().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn span(&self) -> f64 {
        self.inner.span()
    }

    #[getter]
    fn mean_gap(&self) -> f64 {
        self.inner.mean_gap()
    }

    fn increments(&self) -> PyResult<Self> {
        Ok(Series { inner: self.inner.increments().py()? })
    }

    fn window(&self, start: f64, end: f64) -> PyResult<Self> {
        Ok(Series { inner: self.inner.window(start, end).py()? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("IrregularSeries('{}', {} observations)", self.inner.label(), self.inner.len())
    }
}

#[pyclass(name = "FrequencyGrid", module = "xcausal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Grid {
    inner: xcausal::FrequencyGrid,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(delta_f: f64, count: usize) -> PyResult<Self> {
        Ok(Grid { inner: xcausal::FrequencyGrid::new(delta_f, count).py()? })
    }

    /// Fundamental frequency `2 pi / span`.
    #[staticmethod]
    fn from_span(span: f64, count: usize) -> PyResult<Self> {
        Ok(Grid { inner: xcausal::FrequencyGrid::from_span(span, count).py()? })
    }

    #[staticmethod]
    fn for_resolution(lag_step: f64, count: usize) -> PyResult<Self> {
        Ok(Grid { inner: xcausal::FrequencyGrid::for_resolution(lag_step, count).py()? })
    }

    #[getter]
    fn delta_f(&self) -> f64 {
        self.inner.delta_f()
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn natural_lag_step(&self) -> f64 {
        self.inner.natural_lag_step()
    }

    fn __repr__(&self) -> String {
        format!("FrequencyGrid(delta_f={}, count={})", self.inner.delta_f(), self.inner.count())
    }
}

#[pyclass(name = "LagGrid", module = "xcausal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Lags {
    inner: xcausal::LagGrid,
}

#[pymethods]
impl Lags {
    #[new]
    fn new(delta_h: f64, half_count: usize) -> PyResult<Self> {
        Ok(Lags { inner: xcausal::LagGrid::new(delta_h, half_count).py()? })
    }

    #[getter]
    fn lags(&self) -> Vec<f64> {
        self.inner.lags().collect()
    }
}

#[pyclass(name = "FourierProjection", module = "xcausal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Projection {
    inner: xcausal::FourierProjection,
}

#[pymethods]
impl Projection {
    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn n_obs(&self) -> usize {
        self.inner.n_obs()
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid { inner: *self.inner.grid() }
    }

    /// Coefficients as `(re, im)` pairs.
    #[getter]
    fn coeffs(&self) -> Vec<(f64, f64)> {
        self.inner.coeffs().iter().map(|c| (c.re, c.im)).collect()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Projection { inner: xcausal::FourierProjection::from_bytes(data).py()? })
    }

    /// Sum with a partial projection of the same series.
    fn merge(&self, other: &Projection) -> PyResult<Self> {
        Ok(Projection { inner: spectral::merge(&self.inner, &other.inner).py()? })
    }
}

#[pyclass(name = "CrossCorrelogram", module = "xcausal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Correlogram {
    inner: xcausal::CrossCorrelogram,
}

#[pymethods]
impl Correlogram {
    #[getter]
    fn lags(&self) -> Vec<f64> {
        self.inner.lag_grid().lags().collect()
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho().to_vec()
    }

    #[getter]
    fn imag_residual(&self) -> f64 {
        self.inner.imag_residual()
    }

    fn rho_at_zero(&self) -> f64 {
        self.inner.rho_at_zero()
    }

    /// Lag of the largest |rho|.
    fn peak_lag(&self) -> f64 {
        self.inner.lag_grid().lag(self.inner.argmax())
    }

    /// Lead-lag ratio, delay, peak correlation and direction.
    #[pyo3(signature = (theta = DEFAULT_THETA))]
    fn llr<'py>(&self, py: Python<'py>, theta: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = llr_with_threshold(&self.inner, theta);
        let d = PyDict::new(py);
        d.set_item("llr", r.llr)?;
        d.set_item("delay", r.delay)?;
        d.set_item("peak_rho", r.peak_rho)?;
        d.set_item("direction", r.direction.to_string())?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.inner.rho().len()
    }
}

fn hurst_dict<'py>(py: Python<'py>, h: &HurstEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("hurst", h.hurst)?;
    d.set_item("slope", h.slope)?;
    d.set_item("stderr", h.stderr)?;
    d.set_item("n_freqs", h.n_freqs_used)?;
    d.set_item("max_frequency", h.max_frequency)?;
    d.set_item("clipped", h.clipped)?;
    Ok(d)
}

fn options(increments: bool, erase_lrd: bool, low_fraction: f64, smoothing: usize) -> FourierOptions {
    FourierOptions {
        increments,
        detrend: if erase_lrd && !increments { Detrend::Bridge } else { Detrend::None },
        erasure: if erase_lrd { Erasure::Estimated { low_fraction } } else { Erasure::Off },
        smoothing,
    }
}

/// Project a centered series onto the grid.
#[pyfunction]
fn project(series: &Series, grid: &Grid) -> PyResult<Projection> {
    let centered = xcausal::demean(&series.inner);
    Ok(Projection { inner: spectral::project(&centered, &grid.inner).py()? })
}

/// Cross-correlogram of `y` against `x`; positive lags mean `y` follows.
/// Returns the correlogram and, with erasure, the two Hurst fits.
#[pyfunction]
#[pyo3(signature = (x, y, grid, lags, increments = false, erase_lrd = false, low_fraction = 0.1, smoothing = 0))]
#[allow(clippy::too_many_arguments)]
fn xcorr<'py>(
    py: Python<'py>,
    x: &Series,
    y: &Series,
    grid: &Grid,
    lags: &Lags,
    increments: bool,
    erase_lrd: bool,
    low_fraction: f64,
    smoothing: usize,
) -> PyResult<(Correlogram, Bound<'py, PyDict>)> {
    let opts = options(increments, erase_lrd, low_fraction, smoothing);
    let a = py
        .detach(|| pipeline::fourier_correlogram(&x.inner, &y.inner, &grid.inner, &lags.inner, &opts))
        .py()?;
    let diag = PyDict::new(py);
    if let Some(h) = &a.hurst_x {
        diag.set_item("hurst_x", hurst_dict(py, h)?)?;
    }
    if let Some(h) = &a.hurst_y {
        diag.set_item("hurst_y", hurst_dict(py, h)?)?;
    }
    if let Some(w) = &a.whitening {
        diag.set_item("flat", w.is_flat())?;
    }
    Ok((Correlogram { inner: a.correlogram }, diag))
}

/// Hurst exponent from the low-frequency slope of the series' spectrum.
#[pyfunction]
#[pyo3(signature = (series, grid, increments = false, low_fraction = 0.1))]
fn estimate_hurst<'py>(
    py: Python<'py>,
    series: &Series,
    grid: &Grid,
    increments: bool,
    low_fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = FourierOptions {
        increments,
        detrend: if increments { Detrend::None } else { Detrend::Bridge },
        ..Default::default()
    };
    let p = spectral::project(&pipeline::prepare(&series.inner, &opts).py()?, &grid.inner).py()?;
    let mut h = pipeline::hurst_of(&p, low_fraction).py()?;
    if increments {
        h = h.from_increments();
    }
    hurst_dict(py, &h)
}

/// Lagged Hayashi-Yoshida correlogram.
#[pyfunction]
fn hayashi_yoshida(x: &Series, y: &Series, lags: &Lags) -> PyResult<Correlogram> {
    Ok(Correlogram { inner: baselines::hy_lagged_correlogram(&x.inner, &y.inner, &lags.inner).py()? })
}

fn config(settings: Option<HashMap<String, String>>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in settings.unwrap_or_default() {
        cfg.set(&k, &v).py()?;
    }
    cfg.validate().py()?;
    Ok(cfg)
}

/// One simulated pair `(x, y)` for the given settings and trial.
#[pyfunction]
#[pyo3(signature = (settings = None, trial = 0))]
fn simulate_pair(py: Python<'_>, settings: Option<HashMap<String, String>>, trial: u64) -> PyResult<(Series, Series)> {
    let cfg = config(settings)?;
    let (x, y) = py.detach(|| experiments::simulate_pair(&cfg, trial)).py()?;
    Ok((Series { inner: x }, Series { inner: y }))
}

/// Correlogram of every simulated trial with the configured pipeline.
#[pyfunction]
#[pyo3(signature = (settings = None))]
fn run_trials(py: Python<'_>, settings: Option<HashMap<String, String>>) -> PyResult<Vec<Correlogram>> {
    let cfg = config(settings)?;
    let runs = py.detach(|| experiments::run_trials(&cfg)).py()?;
    Ok(runs.into_iter().map(|a| Correlogram { inner: a.correlogram }).collect())
}

/// Project several series with `workers` threads; one projection per
/// series, equal to the single-pass result.
#[pyfunction]
#[pyo3(signature = (series, grid, workers = 1, seed = 0, bridge = false))]
fn run_partitioned(
    py: Python<'_>,
    series: Vec<Series>,
    grid: &Grid,
    workers: usize,
    seed: u64,
    bridge: bool,
) -> PyResult<Vec<Projection>> {
    let inputs: Vec<_> = series.into_iter().map(|s| s.inner).collect();
    let opts = ParallelOptions {
        workers,
        detrend: if bridge { Detrend::Bridge } else { Detrend::None },
        deterministic: true,
        seed,
    };
    let run = py.detach(|| parallel::run_partitioned(&inputs, &grid.inner, &opts)).py()?;
    Ok(run.projections.into_iter().map(|p| Projection { inner: p }).collect())
}

/// Correlogram from two projections on the same grid.
#[pyfunction]
#[pyo3(signature = (px, py_, lags, erase_lrd = false, low_fraction = 0.1))]
fn correlate(px: &Projection, py_: &Projection, lags: &Lags, erase_lrd: bool, low_fraction: f64) -> PyResult<Correlogram> {
    let opts = options(false, erase_lrd, low_fraction, 0);
    let a = pipeline::analyze(&px.inner, &py_.inner, &lags.inner, &opts).py()?;
    Ok(Correlogram { inner: a.correlogram })
}

/// Communication ledger as a `str -> str` dict.
#[pyfunction]
#[pyo3(signature = (series, projections, n_obs, workers = 1, label_bytes = 0))]
fn cost_report(
    series: usize,
    projections: usize,
    n_obs: usize,
    workers: usize,
    label_bytes: usize,
) -> PyResult<HashMap<String, String>> {
    let ledger = parallel::cost_report(series, projections, n_obs, workers, label_bytes).py()?;
    Ok(ledger.to_pairs().into_iter().collect())
}

#[pymodule(name = "xcausal")]
fn xcausal_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Series>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Lags>()?;
    m.add_class::<Projection>()?;
    m.add_class::<Correlogram>()?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(xcorr, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hurst, m)?)?;
    m.add_function(wrap_pyfunction!(hayashi_yoshida, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(run_trials, m)?)?;
    m.add_function(wrap_pyfunction!(run_partitioned, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(cost_report, m)?)?;
    Ok(())
}
