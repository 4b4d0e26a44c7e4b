//! Experiment settings as a flat `key=value` document.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::parse_key_values;

/// How the pair of processes is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Two fBm paths with correlated increments; `y` optionally delayed.
    Fbm,
    /// `y` driven by `x` through the exponential causation kernel.
    Kernel,
}

/// How the frequency spacing is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaF {
    /// `2 pi / T` over the joint span of the pair.
    Span,
    /// Fine enough to resolve the lag step: `2 pi / (P * lag_step)`.
    Resolution,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    Fourier,
    FourierLrd,
    Locf,
    Hy,
}

macro_rules! names {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::param($what, format!("unknown value `{other}`"))),
                }
            }
        }
    };
}

names!(Model, "model", Model::Fbm => "fbm", Model::Kernel => "kernel");
names!(
    PipelineKind,
    "pipeline",
    PipelineKind::Fourier => "fourier",
    PipelineKind::FourierLrd => "fourier+lrd",
    PipelineKind::Locf => "locf",
    PipelineKind::Hy => "hy",
);

impl fmt::Display for DeltaF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaF::Span => f.write_str("span"),
            DeltaF::Resolution => f.write_str("resolution"),
            DeltaF::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for DeltaF {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "span" => Ok(DeltaF::Span),
            "resolution" => Ok(DeltaF::Resolution),
            other => other
                .parse::<f64>()
                .map(DeltaF::Fixed)
                .map_err(|_| Error::param("delta_f", format!("expected span, resolution or a number, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    /// Observation draws for `x` and `y`.
    pub n_x: usize,
    pub n_y: usize,
    /// Length of the simulated interval in seconds.
    pub span: f64,
    /// Simulation grid points over the span.
    pub fine_steps: usize,
    pub model: Model,
    pub hurst: f64,
    /// Increment correlation of the pair.
    pub rho: f64,
    /// Delay of `y` behind `x` in seconds.
    pub tau: f64,
    /// Decay rate of the causation kernel, 1/s.
    pub kernel_beta: f64,
    /// Amplitude of `y`'s own innovations under the kernel model.
    pub noise: f64,
    pub projections: usize,
    pub delta_f: DeltaF,
    /// Lag spacing in seconds; unset picks the pipeline's natural step.
    pub lag_step: Option<f64>,
    /// Lags on each side of zero.
    pub lags: usize,
    pub pipeline: PipelineKind,
    pub increments: bool,
    pub low_fraction: f64,
    pub smoothing: usize,
    pub workers: usize,
    /// Half-width of the symmetric band for direction calls.
    pub theta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            trials: 1,
            n_x: 10_000,
            n_y: 10_000,
            span: 100.0,
            fine_steps: 1 << 17,
            model: Model::Fbm,
            hurst: 0.5,
            rho: 0.0,
            tau: 0.0,
            kernel_beta: 200.0,
            noise: 1.0,
            projections: 1000,
            delta_f: DeltaF::Span,
            lag_step: None,
            lags: 50,
            pipeline: PipelineKind::Fourier,
            increments: false,
            low_fraction: 0.1,
            smoothing: 0,
            workers: 1,
            theta: 0.2,
        }
    }
}

fn parse<T: FromStr>(key: &'static str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| Error::param(key, format!("cannot parse `{v}`")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 23] = [
        "seed",
        "trials",
        "n_x",
        "n_y",
        "span",
        "fine_steps",
        "model",
        "hurst",
        "rho",
        "tau",
        "kernel_beta",
        "noise",
        "projections",
        "delta_f",
        "lag_step",
        "lags",
        "pipeline",
        "increments",
        "low_fraction",
        "smoothing",
        "workers",
        "theta",
        "n_obs",
    ];

    /// Set one key from its text form. `n_obs` sets both observation counts.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse("seed", v)?,
            "trials" => self.trials = parse("trials", v)?,
            "n_x" => self.n_x = parse("n_x", v)?,
            "n_y" => self.n_y = parse("n_y", v)?,
            "n_obs" => {
                self.n_x = parse("n_obs", v)?;
                self.n_y = self.n_x;
            }
            "span" => self.span = parse("span", v)?,
            "fine_steps" => self.fine_steps = parse("fine_steps", v)?,
            "model" => self.model = v.parse()?,
            "hurst" => self.hurst = parse("hurst", v)?,
            "rho" => self.rho = parse("rho", v)?,
            "tau" => self.tau = parse("tau", v)?,
            "kernel_beta" => self.kernel_beta = parse("kernel_beta", v)?,
            "noise" => self.noise = parse("noise", v)?,
            "projections" => self.projections = parse("projections", v)?,
            "delta_f" => self.delta_f = v.parse()?,
            "lag_step" => {
                self.lag_step = match v {
                    "" | "auto" => None,
                    _ => Some(parse("lag_step", v)?),
                }
            }
            "lags" => self.lags = parse("lags", v)?,
            "pipeline" => self.pipeline = v.parse()?,
            "increments" => self.increments = parse("increments", v)?,
            "low_fraction" => self.low_fraction = parse("low_fraction", v)?,
            "smoothing" => self.smoothing = parse("smoothing", v)?,
            "workers" => self.workers = parse("workers", v)?,
            "theta" => self.theta = parse("theta", v)?,
            other => return Err(Error::param("config", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults overridden by the `key=value` text, then validated.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_map(&parse_key_values(text)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let kv = |k: &str, v: String| (k.to_string(), v);
        vec![
            kv("seed", self.seed.to_string()),
            kv("trials", self.trials.to_string()),
            kv("n_x", self.n_x.to_string()),
            kv("n_y", self.n_y.to_string()),
            kv("span", self.span.to_string()),
            kv("fine_steps", self.fine_steps.to_string()),
            kv("model", self.model.to_string()),
            kv("hurst", self.hurst.to_string()),
            kv("rho", self.rho.to_string()),
            kv("tau", self.tau.to_string()),
            kv("kernel_beta", self.kernel_beta.to_string()),
            kv("noise", self.noise.to_string()),
            kv("projections", self.projections.to_string()),
            kv("delta_f", self.delta_f.to_string()),
            kv("lag_step", self.lag_step.map_or("auto".to_string(), |v| v.to_string())),
            kv("lags", self.lags.to_string()),
            kv("pipeline", self.pipeline.to_string()),
            kv("increments", self.increments.to_string()),
            kv("low_fraction", self.low_fraction.to_string()),
            kv("smoothing", self.smoothing.to_string()),
            kv("workers", self.workers.to_string()),
            kv("theta", self.theta.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Simulation grid step in seconds.
    pub fn fine_step(&self) -> f64 {
        self.span / self.fine_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, reason: String| if ok { Ok(()) } else { Err(Error::param(name, reason)) };
        check(self.trials >= 1, "trials", "must be at least 1".into())?;
        check(self.fine_steps >= 2, "fine_steps", "must be at least 2".into())?;
        for (name, n) in [("n_x", self.n_x), ("n_y", self.n_y)] {
            check(
                n >= 2 && n <= self.fine_steps + 1,
                name,
                format!("must lie in [2, fine_steps + 1 = {}], got {n}", self.fine_steps + 1),
            )?;
        }
        check(self.span > 0.0 && self.span.is_finite(), "span", format!("must be positive, got {}", self.span))?;
        check(self.hurst > 0.0 && self.hurst < 1.0, "hurst", format!("must lie in (0, 1), got {}", self.hurst))?;
        match self.model {
            Model::Fbm => check(self.rho.abs() <= 1.0, "rho", format!("must lie in [-1, 1], got {}", self.rho))?,
            Model::Kernel => {
                check(self.rho.abs() < 1.0, "rho", format!("must lie in (-1, 1), got {}", self.rho))?;
                check(self.kernel_beta > 0.0, "kernel_beta", format!("must be positive, got {}", self.kernel_beta))?;
            }
        }
        check(self.tau >= 0.0 && self.tau < self.span, "tau", format!("must lie in [0, span), got {}", self.tau))?;
        check(self.noise >= 0.0, "noise", format!("must be nonnegative, got {}", self.noise))?;
        check(self.projections >= 2, "projections", format!("grid requires P >= 2, got {}", self.projections))?;
        if let DeltaF::Fixed(v) = self.delta_f {
            check(v > 0.0 && v.is_finite(), "delta_f", format!("must be positive, got {v}"))?;
        }
        if let Some(h) = self.lag_step {
            check(h > 0.0 && h.is_finite(), "lag_step", format!("must be positive, got {h}"))?;
        }
        check(self.lags >= 1, "lags", "need at least one lag on each side".into())?;
        check(
            self.low_fraction > 0.0 && self.low_fraction <= 0.5,
            "low_fraction",
            format!("must lie in (0, 0.5], got {}", self.low_fraction),
        )?;
        check(
            2 * self.smoothing < self.projections,
            "smoothing",
            format!("half-width {} too wide for {} projections", self.smoothing, self.projections),
        )?;
        check(self.workers >= 1, "workers", "must be at least 1".into())?;
        check(self.theta >= 0.0, "theta", format!("must be nonnegative, got {}", self.theta))?;
        Ok(())
    }
}
