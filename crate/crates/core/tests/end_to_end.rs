use proptest::prelude::*;
use xcausal::config::{ExperimentConfig, PipelineKind};
use xcausal::experiments::{run_trials, simulate_pair, variance_study};
use xcausal::io::{read_raw_csv, read_series_csv, write_correlogram_csv, write_series_csv};

fn small() -> ExperimentConfig {
    ExperimentConfig { n_x: 2000, n_y: 2000, fine_steps: 1 << 14, projections: 200, ..Default::default() }
}

#[test]
fn spread_shrinks_as_projections_grow() {
    let cfg = ExperimentConfig { trials: 40, increments: true, lag_step: Some(1.0), lags: 4, ..small() };
    let rows = variance_study(&cfg, &[10, 100, 1000, 10000]).unwrap();
    let s: Vec<f64> = rows.iter().map(|r| r.std_at(2)).collect();
    let inversions = s.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{s:?}");
    let r = s[1] / s[2];
    assert!((5f64.sqrt()..=20f64.sqrt()).contains(&r), "std ratio {r}, {s:?}");
}

#[test]
fn whitened_independent_pairs_are_uncorrelated() {
    let cfg = ExperimentConfig {
        trials: 20,
        hurst: 0.7,
        pipeline: PipelineKind::FourierLrd,
        increments: true,
        lags: 10,
        ..small()
    };
    let runs = run_trials(&cfg).unwrap();
    let all: Vec<f64> = runs.iter().flat_map(|a| a.correlogram.rho().iter().map(|r| r.abs())).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!(mean < 0.1, "{mean}");
}

#[test]
fn emitted_csv_reads_back() {
    let (x, y) = simulate_pair(&small(), 0).unwrap();
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &x).unwrap();
    assert_eq!(read_series_csv("x", buf.as_slice()).unwrap(), x);

    let c = xcausal::experiments::analyze_pair(&small(), &x, &y).unwrap().correlogram;
    let mut buf = Vec::new();
    write_correlogram_csv(&mut buf, &c).unwrap();
    let rows = read_raw_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), c.rho().len());
    for ((h, r), (h2, r2)) in rows.iter().zip(c.iter()) {
        assert_eq!((*h, *r), (h2, r2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_depends_only_on_seed_and_trial(seed in any::<u64>(), trial in 0u64..50) {
        let cfg = ExperimentConfig { seed, n_x: 200, n_y: 150, fine_steps: 1024, ..Default::default() };
        let a = simulate_pair(&cfg, trial).unwrap();
        let b = simulate_pair(&cfg, trial).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.0.len() <= 200 && a.1.len() <= 150);
    }
}
