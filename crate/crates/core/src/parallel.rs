//! Partitioned projection with message passing between share-nothing
//! workers, and the communication ledger that goes with it.
//!
//! A run has two rounds. Each worker first sends a fixed-size summary of
//! its shard of every series so the master can center them consistently;
//! then it projects its shards and sends the serialized signatures. The
//! master merges signatures per series.

use std::sync::mpsc;
use std::thread;

use crate::error::{Error, Result};
use crate::pipeline::Detrend;
use crate::series::{FrequencyGrid, IrregularSeries};
use crate::spectral::{merge, project_values, signature_header_len, FourierProjection};

/// Bytes on the wire for one [`ShardSummary`].
pub const SUMMARY_BYTES: usize = 7 * 8;

/// One worker's share of one series' observations, in no particular order.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shard_id: usize,
    pub label: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Deal observations round-robin over `k` shards, starting at shard
/// `seed % k`.
pub fn partition(s: &IrregularSeries, k: usize, seed: u64) -> Result<Vec<Partition>> {
    if k == 0 {
        return Err(Error::param("workers", "need at least one worker"));
    }
    let mut shards: Vec<Partition> = (0..k)
        .map(|shard_id| Partition {
            shard_id,
            label: s.label().to_string(),
            timestamps: Vec::with_capacity(s.len() / k + 1),
            values: Vec::with_capacity(s.len() / k + 1),
        })
        .collect();
    let offset = (seed % k as u64) as usize;
    for (i, (t, v)) in s.pairs().enumerate() {
        let shard = &mut shards[(i + offset) % k];
        shard.timestamps.push(t);
        shard.values.push(v);
    }
    Ok(shards)
}

/// Sums a worker reports so the master can center a series it never sees
/// in full.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShardSummary {
    pub count: u64,
    pub sum_values: f64,
    pub sum_times: f64,
    /// Earliest observation `(t, x)`.
    pub first: (f64, f64),
    /// Latest observation `(t, x)`.
    pub last: (f64, f64),
}

impl ShardSummary {
    pub fn empty() -> Self {
        ShardSummary {
            count: 0,
            sum_values: 0.0,
            sum_times: 0.0,
            first: (f64::INFINITY, 0.0),
            last: (f64::NEG_INFINITY, 0.0),
        }
    }

    pub fn of(shard: &Partition) -> Self {
        let mut s = ShardSummary::empty();
        for (&t, &v) in shard.timestamps.iter().zip(&shard.values) {
            s.count += 1;
            s.sum_values += v;
            s.sum_times += t;
            if t < s.first.0 {
                s.first = (t, v);
            }
            if t > s.last.0 {
                s.last = (t, v);
            }
        }
        s
    }

    pub fn combine(&self, o: &ShardSummary) -> Self {
        ShardSummary {
            count: self.count + o.count,
            sum_values: self.sum_values + o.sum_values,
            sum_times: self.sum_times + o.sum_times,
            first: if o.first.0 < self.first.0 { o.first } else { self.first },
            last: if o.last.0 > self.last.0 { o.last } else { self.last },
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SUMMARY_BYTES);
        out.extend_from_slice(&self.count.to_le_bytes());
        for x in [self.sum_values, self.sum_times, self.first.0, self.first.1, self.last.0, self.last.1] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != SUMMARY_BYTES {
            return Err(Error::Decode(format!("summary must be {SUMMARY_BYTES} bytes, got {}", b.len())));
        }
        let f = |i: usize| f64::from_le_bytes(b[8 * i..8 * i + 8].try_into().unwrap());
        Ok(ShardSummary {
            count: u64::from_le_bytes(b[..8].try_into().unwrap()),
            sum_values: f(1),
            sum_times: f(2),
            first: (f(3), f(4)),
            last: (f(5), f(6)),
        })
    }
}

/// The affine map `x -> x - (a + b t)` that detrends and centers a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centering {
    pub intercept: f64,
    pub slope: f64,
}

impl Centering {
    pub fn from_summary(s: &ShardSummary, detrend: Detrend) -> Result<Self> {
        if s.count == 0 {
            return Err(Error::EmptySeries(0));
        }
        let n = s.count as f64;
        let (mean_t, mean_x) = (s.sum_times / n, s.sum_values / n);
        match detrend {
            Detrend::None => Ok(Centering { intercept: mean_x, slope: 0.0 }),
            Detrend::Bridge => {
                let (t0, x0) = s.first;
                let (t1, x1) = s.last;
                if !(t1 > t0) {
                    return Err(Error::EmptySeries(s.count as usize));
                }
                let slope = (x1 - x0) / (t1 - t0);
                // the line through the end points, plus the mean left after it
                let residual_mean = mean_x - x0 - slope * (mean_t - t0);
                Ok(Centering { intercept: x0 - slope * t0 + residual_mean, slope })
            }
        }
    }

    pub fn apply(&self, t: f64, x: f64) -> f64 {
        x - (self.intercept + self.slope * t)
    }
}

/// Project one shard after centering with the global map. Empty shards give
/// the zero projection.
pub fn worker_project(shard: &Partition, grid: &FrequencyGrid, centering: &Centering) -> Result<FourierProjection> {
    if shard.is_empty() {
        return Ok(FourierProjection::zero(shard.label.clone(), *grid));
    }
    let values: Vec<f64> = shard
        .timestamps
        .iter()
        .zip(&shard.values)
        .map(|(&t, &x)| centering.apply(t, x))
        .collect();
    project_values(shard.label.clone(), &shard.timestamps, &values, grid)
}

/// A partial projection tagged with the shard it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Partial {
    pub shard_id: usize,
    pub projection: FourierProjection,
}

/// Merge partials of one series in shard-id order.
pub fn reduce_all(partials: &[Partial]) -> Result<FourierProjection> {
    let mut order: Vec<&Partial> = partials.iter().collect();
    order.sort_by_key(|p| p.shard_id);
    reduce_in_order(order.into_iter().map(|p| &p.projection))
}

/// Merge partials in the order given.
pub fn reduce_in_order<'a>(mut parts: impl Iterator<Item = &'a FourierProjection>) -> Result<FourierProjection> {
    let first = parts.next().ok_or(Error::EmptySeries(0))?.clone();
    parts.try_fold(first, |acc, p| merge(&acc, p))
}

/// Communication and memory accounting for a partitioned run.
#[derive(Debug, Clone, PartialEq)]
pub struct CostLedger {
    pub series: usize,
    pub projections: usize,
    pub obs_per_series: usize,
    pub workers: usize,
    /// Signature bytes one worker sends: `d (16 P + 28) + label bytes`.
    pub bytes_sent_per_worker: usize,
    pub total_bytes: usize,
    /// Centering summaries one worker sends.
    pub exchange_bytes_per_worker: usize,
    pub datapoints_represented: usize,
    /// `(timestamp, value)` pairs as two `f64` each.
    pub raw_bytes: usize,
    /// Signature bytes over raw bytes.
    pub compression_ratio: f64,
    /// Bytes to ship the raw series to one place instead.
    pub time_domain_bytes: usize,
    /// Signatures held by the master after reduction.
    pub master_signature_bytes: usize,
    pub master_correlograms: usize,
}

impl CostLedger {
    pub fn compressing(&self) -> bool {
        self.compression_ratio < 1.0
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let kv = |k: &str, v: String| (k.to_string(), v);
        vec![
            kv("series", self.series.to_string()),
            kv("projections", self.projections.to_string()),
            kv("obs_per_series", self.obs_per_series.to_string()),
            kv("workers", self.workers.to_string()),
            kv("bytes_sent_per_worker", self.bytes_sent_per_worker.to_string()),
            kv("total_bytes", self.total_bytes.to_string()),
            kv("exchange_bytes_per_worker", self.exchange_bytes_per_worker.to_string()),
            kv("datapoints_represented", self.datapoints_represented.to_string()),
            kv("raw_bytes", self.raw_bytes.to_string()),
            kv("compression_ratio", self.compression_ratio.to_string()),
            kv("compressing", self.compressing().to_string()),
            kv("time_domain_bytes", self.time_domain_bytes.to_string()),
            kv("master_signature_bytes", self.master_signature_bytes.to_string()),
            kv("master_correlograms", self.master_correlograms.to_string()),
        ]
    }
}

/// Ledger for `d` series of `n` observations each projected on `p`
/// frequencies by `k` workers; `label_bytes` is the summed length of the
/// series labels.
pub fn cost_report(d: usize, p: usize, n: usize, k: usize, label_bytes: usize) -> Result<CostLedger> {
    for (name, v) in [("series", d), ("projections", p), ("obs_per_series", n), ("workers", k)] {
        if v == 0 {
            return Err(Error::param(name, "must be positive"));
        }
    }
    let per_worker = d * (16 * p + signature_header_len(0)) + label_bytes;
    let raw = n * d * 16;
    Ok(CostLedger {
        series: d,
        projections: p,
        obs_per_series: n,
        workers: k,
        bytes_sent_per_worker: per_worker,
        total_bytes: k * per_worker,
        exchange_bytes_per_worker: d * SUMMARY_BYTES,
        datapoints_represented: n * d,
        raw_bytes: raw,
        compression_ratio: (k * per_worker) as f64 / raw as f64,
        time_domain_bytes: raw,
        master_signature_bytes: d * p * 16,
        master_correlograms: d * d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelOptions {
    pub workers: usize,
    pub detrend: Detrend,
    /// Merge partials in shard order; otherwise in arrival order.
    pub deterministic: bool,
    pub seed: u64,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        ParallelOptions { workers: 1, detrend: Detrend::None, deterministic: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelRun {
    /// One merged projection per input series, in input order.
    pub projections: Vec<FourierProjection>,
    /// Signature bytes each worker actually sent.
    pub signature_bytes_per_worker: Vec<usize>,
    /// Summary bytes each worker actually sent.
    pub exchange_bytes_per_worker: Vec<usize>,
    pub centerings: Vec<Centering>,
}

enum Message {
    Summaries { worker: usize, bytes: Vec<Vec<u8>> },
    Signature { worker: usize, series: usize, bytes: Vec<u8> },
    Failed(Error),
}

/// Project every series with `opts.workers` threads that share nothing but
/// messages. Each worker holds one round-robin shard of every series.
pub fn run_partitioned(
    series: &[IrregularSeries],
    grid: &FrequencyGrid,
    opts: &ParallelOptions,
) -> Result<ParallelRun> {
    let k = opts.workers;
    let d = series.len();
    if d == 0 {
        return Err(Error::param("series", "need at least one series"));
    }
    // shards[w][s]: worker w's part of series s
    let mut shards: Vec<Vec<Partition>> = (0..k).map(|_| Vec::with_capacity(d)).collect();
    for s in series {
        for (w, part) in partition(s, k, opts.seed)?.into_iter().enumerate() {
            shards[w].push(part);
        }
    }

    let (to_master, inbox) = mpsc::channel::<Message>();
    let mut to_workers = Vec::with_capacity(k);
    let mut worker_inboxes = Vec::with_capacity(k);
    for _ in 0..k {
        let (tx, rx) = mpsc::channel::<Vec<Centering>>();
        to_workers.push(tx);
        worker_inboxes.push(rx);
    }

    thread::scope(|scope| {
        for (w, (mine, rx)) in shards.iter().zip(worker_inboxes).enumerate() {
            let tx = to_master.clone();
            scope.spawn(move || {
                let bytes = mine.iter().map(|p| ShardSummary::of(p).to_bytes()).collect();
                if tx.send(Message::Summaries { worker: w, bytes }).is_err() {
                    return;
                }
                let Ok(centerings) = rx.recv() else { return };
                for (s, (part, c)) in mine.iter().zip(&centerings).enumerate() {
                    let msg = match worker_project(part, grid, c) {
                        Ok(p) => Message::Signature { worker: w, series: s, bytes: p.to_bytes() },
                        Err(e) => Message::Failed(e),
                    };
                    if tx.send(msg).is_err() {
                        return;
                    }
                }
            });
        }
        drop(to_master);
        master(inbox, to_workers, d, k, grid, opts)
    })
}

fn master(
    inbox: mpsc::Receiver<Message>,
    to_workers: Vec<mpsc::Sender<Vec<Centering>>>,
    d: usize,
    k: usize,
    grid: &FrequencyGrid,
    opts: &ParallelOptions,
) -> Result<ParallelRun> {
    let mut exchange_bytes = vec![0usize; k];
    let mut totals = vec![ShardSummary::empty(); d];
    // fold summaries in worker order so centering is reproducible
    let mut by_worker: Vec<Option<Vec<ShardSummary>>> = vec![None; k];
    for _ in 0..k {
        match inbox.recv() {
            Ok(Message::Summaries { worker, bytes }) => {
                exchange_bytes[worker] = bytes.iter().map(Vec::len).sum();
                let sums = bytes.iter().map(|b| ShardSummary::from_bytes(b)).collect::<Result<Vec<_>>>()?;
                by_worker[worker] = Some(sums);
            }
            Ok(Message::Failed(e)) => return Err(e),
            _ => return Err(Error::Decode("worker exited before reporting".into())),
        }
    }
    for sums in by_worker.into_iter().flatten() {
        for (total, s) in totals.iter_mut().zip(&sums) {
            *total = total.combine(s);
        }
    }
    let centerings = totals
        .iter()
        .map(|t| Centering::from_summary(t, opts.detrend))
        .collect::<Result<Vec<_>>>()?;
    for tx in &to_workers {
        // a worker that already exited shows up as a missing signature below
        let _ = tx.send(centerings.clone());
    }

    let mut signature_bytes = vec![0usize; k];
    let mut partials: Vec<Vec<Partial>> = (0..d).map(|_| Vec::with_capacity(k)).collect();
    for _ in 0..d * k {
        match inbox.recv() {
            Ok(Message::Signature { worker, series, bytes }) => {
                signature_bytes[worker] += bytes.len();
                let projection = FourierProjection::from_bytes(&bytes)?;
                if projection.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                partials[series].push(Partial { shard_id: worker, projection });
            }
            Ok(Message::Failed(e)) => return Err(e),
            _ => return Err(Error::Decode("worker exited before sending its signature".into())),
        }
    }
    let projections = partials
        .iter()
        .map(|ps| {
            if opts.deterministic {
                reduce_all(ps)
            } else {
                reduce_in_order(ps.iter().map(|p| &p.projection))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParallelRun {
        projections,
        signature_bytes_per_worker: signature_bytes,
        exchange_bytes_per_worker: exchange_bytes,
        centerings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{prepare, FourierOptions};
    use crate::spectral::project;
    use crate::synth;

    fn sample(n: usize, seed: u64, label: &str) -> IrregularSeries {
        let path = synth::fbm_path(0.6, 4 * n, 0.5, seed).unwrap();
        synth::sample_irregular(&path, n, seed + 1, label).unwrap()
    }

    fn max_rel(a: &FourierProjection, b: &FourierProjection) -> f64 {
        let scale = b.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
        a.coeffs().iter().zip(b.coeffs()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm())) / scale
    }

    #[test]
    fn partition_examples() {
        let s = sample(50, 1, "x");
        let one = partition(&s, 1, 9).unwrap();
        assert_eq!(one[0].timestamps, s.timestamps());
        assert_eq!(one[0].values, s.values());
        let all = partition(&s, s.len(), 3).unwrap();
        assert!(all.iter().all(|p| p.len() == 1));
        let some = partition(&s, 7, 2).unwrap();
        let mut union: Vec<(f64, f64)> = some
            .iter()
            .flat_map(|p| p.timestamps.iter().copied().zip(p.values.iter().copied()))
            .collect();
        union.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(union, s.pairs().collect::<Vec<_>>());
        assert!(partition(&s, 0, 0).is_err());
    }

    #[test]
    fn summaries_round_trip_and_combine() {
        let s = sample(40, 3, "x");
        let parts = partition(&s, 3, 0).unwrap();
        let sums: Vec<_> = parts.iter().map(ShardSummary::of).collect();
        for x in &sums {
            assert_eq!(ShardSummary::from_bytes(&x.to_bytes()).unwrap(), *x);
            assert_eq!(x.to_bytes().len(), SUMMARY_BYTES);
        }
        let total = sums.iter().fold(ShardSummary::empty(), |a, b| a.combine(b));
        assert_eq!(total.count as usize, s.len());
        assert_eq!(total.first, (s.first_time(), s.values()[0]));
        assert_eq!(total.last, (s.last_time(), s.values()[s.len() - 1]));
    }

    #[test]
    fn centering_matches_local_preparation() {
        let s = sample(300, 5, "x");
        let total = ShardSummary::of(&partition(&s, 1, 0).unwrap()[0]);
        for detrend in [Detrend::None, Detrend::Bridge] {
            let c = Centering::from_summary(&total, detrend).unwrap();
            let local = prepare(&s, &FourierOptions { detrend, ..Default::default() }).unwrap();
            for (t, (x, y)) in s.timestamps().iter().zip(s.values().iter().zip(local.values())) {
                assert!((c.apply(*t, *x) - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn worker_projection_examples() {
        let s = sample(500, 7, "x");
        let grid = FrequencyGrid::from_span(s.span(), 64).unwrap();
        let c = Centering { intercept: s.mean(), slope: 0.0 };
        let empty = Partition { shard_id: 0, label: "x".into(), timestamps: vec![], values: vec![] };
        let z = worker_project(&empty, &grid, &c).unwrap();
        assert_eq!(z.n_obs(), 0);
        assert!(z.coeffs().iter().all(|v| v.norm() == 0.0));

        let direct = project(&crate::series::demean(&s), &grid).unwrap();
        let whole = worker_project(&partition(&s, 1, 0).unwrap()[0], &grid, &c).unwrap();
        assert!(max_rel(&whole, &direct) < 1e-12);

        let partials: Vec<Partial> = partition(&s, 7, 0)
            .unwrap()
            .iter()
            .map(|p| Partial { shard_id: p.shard_id, projection: worker_project(p, &grid, &c).unwrap() })
            .collect();
        let merged = reduce_all(&partials).unwrap();
        assert_eq!(merged.n_obs(), s.len());
        assert!(max_rel(&merged, &direct) < 1e-10);

        let mut shuffled = partials.clone();
        shuffled.reverse();
        shuffled.swap(1, 4);
        assert_eq!(reduce_all(&shuffled).unwrap(), merged);
        let arrival = reduce_in_order(shuffled.iter().map(|p| &p.projection)).unwrap();
        assert!(max_rel(&arrival, &merged) < 1e-10);
        assert_eq!(reduce_all(&partials[..1]).unwrap(), partials[0].projection);
    }

    #[test]
    fn reduce_rejects_mixed_grids() {
        let g1 = FrequencyGrid::new(1.0, 4).unwrap();
        let g2 = FrequencyGrid::new(2.0, 4).unwrap();
        let parts = [
            Partial { shard_id: 0, projection: FourierProjection::zero("x", g1) },
            Partial { shard_id: 1, projection: FourierProjection::zero("x", g2) },
        ];
        assert!(matches!(reduce_all(&parts), Err(Error::GridMismatch)));
    }

    #[test]
    fn ledger_arithmetic() {
        let l = cost_report(1, 1000, 100_000, 1, 0).unwrap();
        assert_eq!(l.bytes_sent_per_worker, 16_000 + 28);
        assert_eq!(l.raw_bytes, 1_600_000);
        assert!((l.compression_ratio - 0.01).abs() < 1e-4);
        assert!(l.compressing());
        let l = cost_report(1, 5000, 5000, 1, 0).unwrap();
        assert!((l.compression_ratio - 1.0).abs() < 1e-3);
        assert!(!l.compressing());
        let l = cost_report(4, 3000, 5_000_000, 1, 0).unwrap();
        assert!(l.compression_ratio < 0.01);
        assert_eq!(l.master_signature_bytes, 4 * 3000 * 16);
        assert_eq!(l.master_correlograms, 16);
        assert!(cost_report(0, 1, 1, 1, 0).is_err());
    }

    #[test]
    fn threaded_run_matches_single_pass() {
        let xs = [sample(2000, 11, "x"), sample(1500, 13, "yy")];
        let grid = FrequencyGrid::from_span(xs[0].span(), 128).unwrap();
        for detrend in [Detrend::None, Detrend::Bridge] {
            let opts = FourierOptions { detrend, ..Default::default() };
            let direct: Vec<_> = xs.iter().map(|s| project(&prepare(s, &opts).unwrap(), &grid).unwrap()).collect();
            for k in [1, 2, 4, 8] {
                let run = run_partitioned(&xs, &grid, &ParallelOptions { workers: k, detrend, ..Default::default() })
                    .unwrap();
                for (a, b) in run.projections.iter().zip(&direct) {
                    assert!(max_rel(a, b) < 1e-10, "k={k}");
                    assert_eq!(a.label(), b.label());
                }
                let ledger = cost_report(2, 128, 2000, k, 1 + 2).unwrap();
                assert!(run.signature_bytes_per_worker.iter().all(|b| *b == ledger.bytes_sent_per_worker));
                assert!(run.exchange_bytes_per_worker.iter().all(|b| *b == ledger.exchange_bytes_per_worker));
            }
        }
    }

    #[test]
    fn fast_mode_agrees() {
        let xs = [sample(1000, 17, "x")];
        let grid = FrequencyGrid::from_span(xs[0].span(), 32).unwrap();
        let det = run_partitioned(&xs, &grid, &ParallelOptions { workers: 4, ..Default::default() }).unwrap();
        let fast = run_partitioned(
            &xs,
            &grid,
            &ParallelOptions { workers: 4, deterministic: false, ..Default::default() },
        )
        .unwrap();
        assert!(max_rel(&fast.projections[0], &det.projections[0]) < 1e-10);
    }
}
