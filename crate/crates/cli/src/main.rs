//! `xcausal`: lead-lag analysis of irregularly sampled series from the
//! command line.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use settings::{CliError, ConfigArgs};

#[derive(Parser, Debug)]
#[command(name = "xcausal", version, about = "Frequency-domain lead-lag estimation for irregular time series")]
struct Cli {
    /// Worker threads for trial and pair parallelism
    #[arg(long, global = true, env = "XCAUSAL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic pairs as CSV with a metadata sidecar
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for trial-indexed CSV files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Clean a raw timestamp,value CSV: sort, drop duplicate timestamps, window
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep observations at or after this time
        #[arg(long)]
        start: Option<f64>,
        /// Keep observations at or before this time
        #[arg(long)]
        end: Option<f64>,
    },
    /// Project series onto the Fourier basis with k workers; one signature file per series
    Project {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Subtract the line through each series' end points before projecting
        #[arg(long)]
        bridge: bool,
        /// Merge partials in arrival order instead of shard order
        #[arg(long)]
        fast: bool,
        /// Also write the cost ledger to this file
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Correlograms for every ordered pair of signature files
    Reduce {
        #[arg(required = true)]
        signatures: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: PairOut,
    },
    /// Correlograms for every ordered pair of series CSV files
    Xcorr {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        out: PairOut,
    },
    /// Hurst exponent of each series from its low-frequency spectrum
    Hurst {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time-domain correlogram of a pair: previous-tick resampling or Hayashi-Yoshida
    Baseline {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Lead-lag ratio, delay and direction of correlogram CSV files
    Llr {
        #[arg(required = true)]
        correlograms: Vec<PathBuf>,
        #[arg(long, default_value_t = xcausal::causal::DEFAULT_THETA)]
        theta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 5th, 50th and 95th percentile band over trials
    Band {
        /// Correlogram CSV files; without any, trials are simulated from the settings
        correlograms: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Lead-lag ratios of previous-tick and Fourier pipelines at several sampling ratios
    Table1 {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(short = 'p', long)]
        projections: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,4.5,10")]
        ratios: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spread of the correlogram over trials against the number of projections
    VarianceStudy {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        sweep: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Communication and memory accounting for a partitioned run
    CostReport {
        /// Number of series d
        #[arg(long, default_value_t = 2)]
        series: usize,
        #[arg(short = 'p', long, default_value_t = 1000)]
        projections: usize,
        /// Observations per series N
        #[arg(long, default_value_t = 10_000)]
        n_obs: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Summed byte length of the series labels
        #[arg(long, default_value_t = 0)]
        label_bytes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Where pairwise correlograms go.
#[derive(clap::Args, Debug)]
struct PairOut {
    /// Write one lag,rho CSV per ordered pair here instead of a long table on stdout
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BaselineMethod {
    Locf,
    Hy,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    }
    use Command::*;
    match cli.command {
        Simulate { cfg, out_dir } => commands::simulate(&cfg.experiment()?, &out_dir),
        Ingest { input, out, start, end } => commands::ingest(&input, out.as_deref(), start, end),
        Project { inputs, cfg, out_dir, bridge, fast, ledger } => {
            commands::project(&inputs, &cfg.experiment()?, &out_dir, bridge, !fast, ledger.as_deref())
        }
        Reduce { signatures, cfg, out } => {
            commands::reduce(&signatures, &cfg.experiment()?, out.out_dir.as_deref(), out.gnuplot.as_deref())
        }
        Xcorr { inputs, cfg, out } => {
            commands::xcorr(&inputs, &cfg.experiment()?, out.out_dir.as_deref(), out.gnuplot.as_deref())
        }
        Hurst { inputs, cfg } => commands::hurst(&inputs, &cfg.experiment()?),
        Baseline { x, y, method, cfg, out, gnuplot } => {
            let pipeline = match method {
                BaselineMethod::Locf => xcausal::config::PipelineKind::Locf,
                BaselineMethod::Hy => xcausal::config::PipelineKind::Hy,
            };
            commands::baseline(&x, &y, pipeline, &cfg.experiment()?, out.as_deref(), gnuplot.as_deref())
        }
        Llr { correlograms, theta, out } => commands::llr(&correlograms, theta, out.as_deref()),
        Band { correlograms, cfg, out, gnuplot } => {
            commands::band(&correlograms, &cfg, out.as_deref(), gnuplot.as_deref())
        }
        Table1 { config, set, seed, trials, n1, projections, rho, ratios, out } => {
            let mut layers = Vec::new();
            if let Some(p) = &config {
                let text = settings::read_text(p)?;
                let map = xcausal::io::parse_key_values(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                layers.extend(map);
            }
            for s in &set {
                let (k, v) = s
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
                layers.push((k.trim().to_string(), v.trim().to_string()));
            }
            let named = [
                ("seed", seed.map(|v| v.to_string())),
                ("trials", trials.map(|v| v.to_string())),
                ("n1", n1.map(|v| v.to_string())),
                ("projections", projections.map(|v| v.to_string())),
                ("rho", rho.map(|v| v.to_string())),
            ];
            layers.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
            commands::table1(&layers, &ratios, out.as_deref())
        }
        VarianceStudy { cfg, sweep, out, gnuplot } => {
            commands::variance_study(&cfg.experiment()?, &sweep, out.as_deref(), gnuplot.as_deref())
        }
        CostReport { series, projections, n_obs, workers, label_bytes, out } => {
            commands::cost_report(series, projections, n_obs, workers, label_bytes, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
