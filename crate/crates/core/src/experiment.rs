//! Experiment drivers: trace generation, policy comparisons, b sweeps,
//! queue micro-benchmarks and scheduler overhead, all emitting CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{sample_quantile, BatchCostCoefficients, EmpiricalHistogram};
use crate::error::{Error, Result};
use crate::hull::{new_queue, HullPoint};
use crate::scheduler::{
    new_policy, policy_names, refresh_batch_models, CandidateOrder, LatencyEstimate, Orloj, Policy,
    Request, SchedulerConfig,
};
use crate::sim::{self, RunMetrics, SimConfig, WorkerModel};
use crate::workload::{ArrivalSpec, MixtureSpec, Trace};

/// Columns holding wall-clock measurements; they differ between reruns.
pub const TIMING_COLUMNS: [&str; 4] = [
    "insert_mean_ns",
    "query_mean_ns",
    "iterate_median_ns",
    "iterate_p99_ns",
];

/// Everything an experiment needs, read from one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Workload preset used when no trace file is given.
    pub workload: String,
    pub sigma: f64,
    /// Replay this trace instead of generating one.
    pub trace: Option<PathBuf>,
    pub n: usize,
    pub rate_per_s: f64,
    /// Overrides `rate_per_s` when set.
    pub arrival: Option<ArrivalSpec>,
    pub policies: Vec<String>,
    pub slo_multiples: Vec<f64>,
    pub b: f64,
    pub b_values: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub batch_sizes: Vec<usize>,
    pub c0: f64,
    pub c1: f64,
    pub refresh_period_ms: f64,
    pub profile_window_ms: f64,
    pub profile_rate: f64,
    pub tick_ms: f64,
    pub estimate: LatencyEstimate,
    pub candidate_order: CandidateOrder,
    pub prior_lo_ms: f64,
    pub prior_hi_ms: f64,
    pub hist_bins: usize,
    pub score_bins: usize,
    pub queue: String,
    pub bench_sizes: Vec<usize>,
    pub bench_samples: usize,
    pub scale_factors: Vec<f64>,
    pub overhead_pending: usize,
    pub out_dir: PathBuf,
    /// Write one JSONL file of per-request records per run.
    pub log_requests: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sched = SchedulerConfig::default();
        Self {
            workload: "two_modal".into(),
            sigma: 1.0,
            trace: None,
            n: 20_000,
            rate_per_s: 6.4,
            arrival: None,
            policies: policy_names().iter().map(|s| s.to_string()).collect(),
            slo_multiples: vec![1.5, 2.0, 3.0, 4.0, 5.0],
            b: sched.b,
            b_values: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            repeats: 5,
            seed: 0,
            batch_sizes: sched.batch_sizes,
            c0: 0.0,
            c1: 1.0,
            refresh_period_ms: sched.refresh_period_ms,
            profile_window_ms: sched.profile_window_ms,
            profile_rate: SimConfig::default().profile_rate,
            tick_ms: SimConfig::default().tick_ms,
            estimate: sched.estimate,
            candidate_order: sched.candidate_order,
            prior_lo_ms: sched.prior_lo_ms,
            prior_hi_ms: sched.prior_hi_ms,
            hist_bins: sched.hist_bins,
            score_bins: sched.score_bins,
            queue: sched.queue,
            bench_sizes: vec![10, 100, 1000, 10_000],
            bench_samples: 100,
            scale_factors: vec![1.0, 0.1, 0.01, 0.001],
            overhead_pending: 10_000,
            out_dir: PathBuf::from("results"),
            log_requests: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::invalid("policy list is empty"));
        }
        let known = policy_names();
        for p in &self.policies {
            if !known.contains(&p.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown policy `{p}` (known: {})",
                    known.join(", ")
                )));
            }
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be >= 1"));
        }
        if self.slo_multiples.is_empty() || self.slo_multiples.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::invalid(
                "SLO multiples must be a non-empty list of values > 0",
            ));
        }
        if self.b_values.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("b values must be finite and > 0"));
        }
        if self
            .scale_factors
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::invalid("scale factors must be finite and > 0"));
        }
        if let Some(path) = &self.trace {
            if !path.exists() {
                return Err(Error::invalid(format!(
                    "trace {} does not exist",
                    path.display()
                )));
            }
        } else {
            MixtureSpec::preset(&self.workload, self.sigma)?.validate()?;
            if self.n == 0 {
                return Err(Error::invalid("trace length must be >= 1"));
            }
        }
        self.scheduler(self.b).validate()?;
        self.sim_config().validate()
    }

    pub fn coeffs(&self) -> BatchCostCoefficients {
        BatchCostCoefficients {
            c0: self.c0,
            c1: self.c1,
        }
    }

    pub fn scheduler(&self, b: f64) -> SchedulerConfig {
        SchedulerConfig {
            batch_sizes: self.batch_sizes.clone(),
            coeffs: self.coeffs(),
            b,
            refresh_period_ms: self.refresh_period_ms,
            profile_window_ms: self.profile_window_ms,
            estimate: self.estimate,
            candidate_order: self.candidate_order,
            prior_lo_ms: self.prior_lo_ms,
            prior_hi_ms: self.prior_hi_ms,
            hist_bins: self.hist_bins,
            score_bins: self.score_bins,
            queue: self.queue.clone(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            profile_rate: self.profile_rate,
            tick_ms: self.tick_ms,
            refresh_period_ms: self.refresh_period_ms,
            record_requests: self.log_requests,
            measure_overhead: false,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn workload_id(&self) -> String {
        match &self.trace {
            Some(p) => p
                .file_stem()
                .map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned()),
            None => format!("{}_sigma{}", self.workload, self.sigma),
        }
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }

    /// The trace of one repeat with SLO at one P99 multiple.
    pub fn base_trace(&self, repeat: usize) -> Result<Trace> {
        match &self.trace {
            Some(p) => Trace::load(p),
            None => {
                let arrival = self.arrival.clone().unwrap_or(ArrivalSpec::Poisson {
                    rate_per_s: self.rate_per_s,
                });
                crate::workload::generate(
                    &MixtureSpec::preset(&self.workload, self.sigma)?,
                    &arrival,
                    self.n,
                    1.0,
                    self.repeat_seed(repeat),
                )
            }
        }
    }
}

/// One simulation, or the mean over repeats when `kind` is `aggregate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub kind: String,
    pub run_id: String,
    pub workload_id: String,
    pub policy: String,
    pub slo_multiple: f64,
    pub b: f64,
    pub repeat: Option<usize>,
    pub seed: u64,
    pub total: usize,
    pub finish_rate: f64,
    pub finish_rate_std: Option<f64>,
    pub p50_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub dropped: f64,
    pub late: f64,
    pub utilization: f64,
    pub rebases: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub slo_multiple: f64,
    pub min_finish_rate: f64,
    pub max_finish_rate: f64,
    pub spread: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub queue: String,
    pub n: usize,
    pub samples: usize,
    pub insert_mean_ns: f64,
    pub query_mean_ns: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub kind: String,
    pub policy: String,
    pub scale: Option<f64>,
    pub p99_exec_ms: Option<f64>,
    pub finish_rate: Option<f64>,
    pub pending: usize,
    pub iterate_median_ns: f64,
    pub iterate_p99_ns: f64,
    pub seed: u64,
    pub config_hash: String,
}

struct Job {
    policy: String,
    slo: f64,
    b: f64,
    repeat: usize,
}

fn run_id(workload: &str, policy: &str, slo: f64, b: f64, repeat: Option<usize>) -> String {
    let r = repeat.map_or_else(|| "agg".to_string(), |r| r.to_string());
    format!("{workload}/{policy}/slo{slo}/b{b:e}/r{r}")
}

fn simulate(
    config: &ExperimentConfig,
    trace: &Trace,
    policy: &str,
    b: f64,
    sim_config: &SimConfig,
    seed: u64,
) -> Result<RunMetrics> {
    let mut p = new_policy(policy, &config.scheduler(b))?;
    sim::run(
        trace,
        p.as_mut(),
        WorkerModel::new(config.coeffs()),
        sim_config,
        seed,
    )
}

fn write_request_log(dir: &Path, id: &str, m: &RunMetrics) -> Result<()> {
    let dir = dir.join("requests");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(format!("{}.jsonl", id.replace('/', "_")));
    let mut text = String::new();
    for r in &m.records {
        text += &serde_json::to_string(r).map_err(|e| Error::Invariant(e.to_string()))?;
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Runs every (policy, SLO multiple, b, repeat) cell and appends one
/// aggregate row per (policy, SLO multiple, b). Rows come back sorted by
/// run id, independent of thread scheduling.
pub fn run_grid(
    config: &ExperimentConfig,
    policies: &[String],
    slos: &[f64],
    bs: &[f64],
) -> Result<Vec<RunRow>> {
    config.validate()?;
    let hash = config.hash();
    let workload = config.workload_id();
    let traces: Vec<Trace> = (0..config.repeats)
        .into_par_iter()
        .map(|r| config.base_trace(r))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for policy in policies {
        for &slo in slos {
            for &b in bs {
                for repeat in 0..config.repeats {
                    jobs.push(Job {
                        policy: policy.clone(),
                        slo,
                        b,
                        repeat,
                    });
                }
            }
        }
    }
    let sim_config = config.sim_config();
    let mut rows: Vec<RunRow> = jobs
        .par_iter()
        .map(|job| {
            let trace = traces[job.repeat].with_slo_multiple(job.slo)?;
            let seed = config.repeat_seed(job.repeat);
            let m = simulate(config, &trace, &job.policy, job.b, &sim_config, seed)?;
            let id = run_id(&workload, &job.policy, job.slo, job.b, Some(job.repeat));
            if config.log_requests {
                write_request_log(&config.out_dir, &id, &m)?;
            }
            log::info!("{id}: finish rate {:.4}", m.finish_rate);
            Ok(RunRow {
                kind: "run".into(),
                run_id: id,
                workload_id: workload.clone(),
                policy: job.policy.clone(),
                slo_multiple: job.slo,
                b: job.b,
                repeat: Some(job.repeat),
                seed,
                total: m.total,
                finish_rate: m.finish_rate,
                finish_rate_std: None,
                p50_latency_ms: m.p50_latency_ms,
                p99_latency_ms: m.p99_latency_ms,
                dropped: m.dropped as f64,
                late: m.late as f64,
                utilization: m.utilization(),
                rebases: m.policy_stats.rebases,
                config_hash: hash.clone(),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let aggregates = aggregate(&rows);
    rows.extend(aggregates);
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean rows (with the finish-rate standard deviation) per cell.
pub fn aggregate(rows: &[RunRow]) -> Vec<RunRow> {
    let mut cells: BTreeMap<String, Vec<&RunRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == "run") {
        let id = run_id(&r.workload_id, &r.policy, r.slo_multiple, r.b, None);
        cells.entry(id).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|(id, rs)| {
            let col =
                |f: fn(&RunRow) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (finish, finish_std) = col(|r| r.finish_rate);
            let first = rs[0];
            RunRow {
                kind: "aggregate".into(),
                run_id: id,
                workload_id: first.workload_id.clone(),
                policy: first.policy.clone(),
                slo_multiple: first.slo_multiple,
                b: first.b,
                repeat: None,
                seed: rs.iter().map(|r| r.seed).min().unwrap_or(0),
                total: first.total,
                finish_rate: finish,
                finish_rate_std: Some(finish_std),
                p50_latency_ms: col(|r| r.p50_latency_ms).0,
                p99_latency_ms: col(|r| r.p99_latency_ms).0,
                dropped: col(|r| r.dropped).0,
                late: col(|r| r.late).0,
                utilization: col(|r| r.utilization).0,
                rebases: rs.iter().map(|r| r.rebases).sum::<u64>() / rs.len() as u64,
                config_hash: first.config_hash.clone(),
            }
        })
        .collect()
}

/// Policy comparison at the configured b.
pub fn cmd_run(config: &ExperimentConfig) -> Result<Vec<RunRow>> {
    run_grid(config, &config.policies, &config.slo_multiples, &[config.b])
}

/// Orloj across `b_values`; returns the rows and the per-SLO spread of
/// aggregate finish rates.
pub fn cmd_sweep_b(config: &ExperimentConfig) -> Result<(Vec<RunRow>, Vec<SpreadRow>)> {
    if config.b_values.is_empty() {
        return Err(Error::invalid("b sweep needs at least one b value"));
    }
    let rows = run_grid(
        config,
        &["orloj".to_string()],
        &config.slo_multiples,
        &config.b_values,
    )?;
    Ok((rows.clone(), spread(&rows, config)))
}

pub fn spread(rows: &[RunRow], config: &ExperimentConfig) -> Vec<SpreadRow> {
    let mut by_slo: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == "aggregate") {
        by_slo
            .entry(r.slo_multiple.to_bits())
            .or_insert_with(|| (r.slo_multiple, Vec::new()))
            .1
            .push(r.finish_rate);
    }
    let mut out: Vec<SpreadRow> = by_slo
        .into_values()
        .map(|(slo, rates)| {
            let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            SpreadRow {
                slo_multiple: slo,
                min_finish_rate: lo,
                max_finish_rate: hi,
                spread: hi - lo,
                seed: config.seed,
                config_hash: config.hash(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.slo_multiple.total_cmp(&b.slo_multiple));
    out
}

fn random_point(rng: &mut ChaCha8Rng, key: u64) -> HullPoint {
    HullPoint::new(rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), key)
}

/// Fills a queue to each size, then times `bench_samples` insertions (each
/// undone right after) and as many max queries at random slopes.
pub fn cmd_bench_queue(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<BenchRow>> {
    if config.bench_samples == 0 {
        return Err(Error::invalid("bench samples must be >= 1"));
    }
    let hash = config.hash();
    let mut rows = Vec::new();
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ n as u64);
        let mut q = new_queue(&config.queue)?;
        for key in 0..n as u64 {
            q.insert(random_point(&mut rng, key))?;
        }
        let mut insert_ns = 0u128;
        for i in 0..config.bench_samples {
            let p = random_point(&mut rng, (n + i) as u64);
            let t = Instant::now();
            q.insert(p)?;
            insert_ns += t.elapsed().as_nanos();
            q.remove(p.key)?;
        }
        let mut query_ns = 0u128;
        for _ in 0..config.bench_samples {
            let slope = rng.random_range(0.01..100.0);
            let t = Instant::now();
            let top = q.query_max(slope);
            query_ns += t.elapsed().as_nanos();
            if n > 0 {
                top?;
            }
        }
        let samples = config.bench_samples as f64;
        rows.push(BenchRow {
            queue: config.queue.clone(),
            n,
            samples: config.bench_samples,
            insert_mean_ns: insert_ns as f64 / samples,
            query_mean_ns: query_ns as f64 / samples,
            seed: config.seed,
            config_hash: hash.clone(),
        });
    }
    Ok(rows)
}

fn percentile_ns(xs: &[u64], q: f64) -> f64 {
    let v: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
    sample_quantile(&v, q).unwrap_or(f64::NAN)
}

/// Finish rate as the execution time distribution shrinks, the measured
/// wall time of scheduler decisions, and the decision time with
/// `overhead_pending` requests waiting.
pub fn cmd_overhead(config: &ExperimentConfig) -> Result<Vec<OverheadRow>> {
    config.validate()?;
    let hash = config.hash();
    let base = config.base_trace(0)?;
    let seed = config.repeat_seed(0);
    let slo = config.slo_multiples[0];
    let mut sim_config = config.sim_config();
    sim_config.measure_overhead = true;
    sim_config.record_requests = false;
    let mut rows = Vec::new();
    for policy in &config.policies {
        for &scale in &config.scale_factors {
            let trace = base.scale_exec(scale)?.with_slo_multiple(slo)?;
            let mut scaled = config.clone();
            scaled.c0 *= scale;
            scaled.prior_lo_ms *= scale;
            scaled.prior_hi_ms *= scale;
            scaled.tick_ms = (config.tick_ms * scale).max(1e-3);
            let mut sc = sim_config.clone();
            sc.tick_ms = scaled.tick_ms;
            let m = simulate(&scaled, &trace, policy, config.b, &sc, seed)?;
            rows.push(OverheadRow {
                kind: "scale".into(),
                policy: policy.clone(),
                scale: Some(scale),
                p99_exec_ms: Some(trace.p99()?),
                finish_rate: Some(m.finish_rate),
                pending: m.max_pending,
                iterate_median_ns: percentile_ns(&m.iterate_ns, 0.5),
                iterate_p99_ns: percentile_ns(&m.iterate_ns, 0.99),
                seed,
                config_hash: hash.clone(),
            });
        }
    }
    let ns = pending_probe(config, config.overhead_pending, seed)?;
    rows.push(OverheadRow {
        kind: "pending".into(),
        policy: "orloj".into(),
        scale: None,
        p99_exec_ms: None,
        finish_rate: None,
        pending: config.overhead_pending,
        iterate_median_ns: percentile_ns(&ns, 0.5),
        iterate_p99_ns: percentile_ns(&ns, 0.99),
        seed,
        config_hash: hash,
    });
    Ok(rows)
}

/// Times iterate calls on a warm Orloj holding `pending` requests with
/// deadlines far enough out that nothing is dropped.
fn pending_probe(config: &ExperimentConfig, pending: usize, seed: u64) -> Result<Vec<u64>> {
    let sched = config.scheduler(config.b);
    let mut orloj = Orloj::new(sched.clone())?;
    let trace = config.base_trace(0)?;
    let hist = EmpiricalHistogram::from_samples(&trace.execs(), config.hist_bins)?;
    let prior = EmpiricalHistogram::uniform(config.prior_lo_ms, config.prior_hi_ms)?;
    let models = refresh_batch_models(
        &[("all".to_string(), hist)].into_iter().collect(),
        &BTreeMap::new(),
        &sched.sorted_sizes(),
        config.coeffs(),
        &prior,
        config.score_bins,
    )?;
    orloj.set_batch_models(models, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in 0..pending as u64 {
        let slo = rng.random_range(1.0e5..2.0e5);
        orloj.on_arrival(Request::new(id, "all", 0.0, slo), 0.0)?;
    }
    let calls = config.bench_samples.max(1);
    let mut out = Vec::with_capacity(calls);
    for i in 0..calls {
        let now = i as f64;
        let t = Instant::now();
        let batch = orloj.iterate(now)?;
        out.push(t.elapsed().as_nanos() as u64);
        if let Some(b) = batch {
            orloj.on_batch_complete(b.id, now)?;
        }
    }
    Ok(out)
}

/// Writes one trace per repeat seed; returns the written paths.
pub fn cmd_gen(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    if config.trace.is_some() {
        return Err(Error::invalid(
            "gen generates traces; remove `trace` from the config",
        ));
    }
    config.validate()?;
    let dir = config.out_dir.join("traces");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    (0..config.repeats)
        .map(|r| {
            let path = dir.join(format!(
                "{}_seed{}.jsonl",
                config.workload_id(),
                config.repeat_seed(r)
            ));
            config.base_trace(r)?.save(&path)?;
            Ok(path)
        })
        .collect()
}

/// Serializes rows as CSV text.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Invariant(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invariant(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_csv(rows)?).map_err(|e| Error::io(path, e))
}

/// Drops the named columns from CSV text, for comparing reruns.
pub fn strip_columns(csv_text: &str, drop: &[&str]) -> Result<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .clone();
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&i| !drop.contains(&&headers[i]))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let pick =
        |rec: &csv::StringRecord| keep.iter().map(|&i| rec[i].to_string()).collect::<Vec<_>>();
    w.write_record(pick(&headers))
        .map_err(|e| Error::Invariant(e.to_string()))?;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
        w.write_record(pick(&rec))
            .map_err(|e| Error::Invariant(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invariant(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}
