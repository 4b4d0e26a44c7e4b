//! Error classification and the defaults < file < flags layering of
//! experiment settings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use xcausal::config::ExperimentConfig;
use xcausal::io::parse_key_values;
use xcausal::ErrorClass;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Core { context: String, source: xcausal::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Core { source, .. } => match source.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core { context, source } if context.is_empty() => write!(f, "{source}"),
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl From<xcausal::Error> for CliError {
    fn from(source: xcausal::Error) -> Self {
        CliError::Core { context: String::new(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for xcausal::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core { context: what(), source })
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Experiment settings shared by every subcommand that simulates or
/// estimates.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Flat `key=value` settings file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one setting; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Observation draws per series
    #[arg(long)]
    pub n_obs: Option<usize>,
    /// Simulated interval in seconds
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Delay of y behind x in seconds
    #[arg(long)]
    pub tau: Option<f64>,
    /// fbm or kernel
    #[arg(long)]
    pub model: Option<String>,
    /// Number of Fourier projections P
    #[arg(short = 'p', long)]
    pub projections: Option<usize>,
    /// span, resolution or a number
    #[arg(long)]
    pub delta_f: Option<String>,
    /// Lag spacing in seconds, or `auto`
    #[arg(long)]
    pub lag_step: Option<String>,
    /// Lags on each side of zero
    #[arg(long)]
    pub lags: Option<usize>,
    /// fourier, fourier+lrd, locf or hy
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Analyse increments between observations instead of levels
    #[arg(long)]
    pub increments: bool,
    /// Estimate each series' memory and erase it before crossing
    #[arg(long)]
    pub erase_lrd: bool,
    /// Share of the lowest frequencies used to fit the spectral slope
    #[arg(long)]
    pub low_fraction: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Half-width of the band around 1 called symmetric
    #[arg(long)]
    pub theta: Option<f64>,
}

impl ConfigArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("trials", self.trials.map(|v| v.to_string()));
        put("n_obs", self.n_obs.map(|v| v.to_string()));
        put("span", self.span.map(|v| v.to_string()));
        put("hurst", self.hurst.map(|v| v.to_string()));
        put("rho", self.rho.map(|v| v.to_string()));
        put("tau", self.tau.map(|v| v.to_string()));
        put("model", self.model.clone());
        put("projections", self.projections.map(|v| v.to_string()));
        put("delta_f", self.delta_f.clone());
        put("lag_step", self.lag_step.clone());
        put("lags", self.lags.map(|v| v.to_string()));
        put("pipeline", self.pipeline.clone());
        put("increments", self.increments.then(|| "true".to_string()));
        put("pipeline", self.erase_lrd.then(|| "fourier+lrd".to_string()));
        put("low_fraction", self.low_fraction.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("theta", self.theta.map(|v| v.to_string()));
        out
    }

    /// `key=value` pairs from the file, then `--set`, then named flags.
    pub fn layers(&self) -> CliResult<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        if let Some(path) = &self.config {
            let text = read_text(path)?;
            let map = parse_key_values(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            pairs.extend(map);
        }
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(self.flag_pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
        Ok(pairs)
    }

    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in self.layers()? {
            cfg.set(&k, &v).map_err(|e| CliError::Config(e.to_string()))?;
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "seed=5\nprojections=300\nlags=7\n").unwrap();
        let args = ConfigArgs { config: Some(path), projections: Some(64), ..Default::default() };
        let cfg = args.experiment().unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.projections, 64);
        assert_eq!(cfg.lags, 7);
        assert_eq!(cfg.trials, ExperimentConfig::default().trials);
    }

    #[test]
    fn set_overrides_file_and_flags_override_set() {
        let args = ConfigArgs {
            set: vec!["hurst=0.7".into(), "rho=0.3".into()],
            rho: Some(0.5),
            ..Default::default()
        };
        let cfg = args.experiment().unwrap();
        assert_eq!(cfg.hurst, 0.7);
        assert_eq!(cfg.rho, 0.5);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        for set in ["nonsense=1", "projections=1", "hurst"] {
            let args = ConfigArgs { set: vec![set.into()], ..Default::default() };
            assert_eq!(args.experiment().unwrap_err().exit_code(), 2, "{set}");
        }
    }

    #[test]
    fn erase_flag_selects_lrd_pipeline() {
        let args = ConfigArgs { erase_lrd: true, ..Default::default() };
        assert_eq!(args.experiment().unwrap().pipeline.to_string(), "fourier+lrd");
    }
}
