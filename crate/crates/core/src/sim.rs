//! Discrete-event simulation of one non-preemptive batch worker.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_quantile, BatchCostCoefficients};
use crate::error::{Error, Result};
use crate::scheduler::{Batch, Policy, PolicyStats, Request, RequestId};
use crate::workload::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Fraction of completed requests whose solo execution time is reported
    /// to the profiler.
    pub profile_rate: f64,
    /// Scheduler poll period while the worker is idle and requests wait.
    pub tick_ms: f64,
    pub refresh_period_ms: f64,
    /// Keep per-request records in the metrics.
    pub record_requests: bool,
    /// Measure wall time of every scheduler call.
    pub measure_overhead: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            profile_rate: 0.1,
            tick_ms: 1.0,
            refresh_period_ms: 1000.0,
            record_requests: false,
            measure_overhead: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.profile_rate) {
            return Err(Error::invalid("profile rate must lie in [0, 1]"));
        }
        if !(self.tick_ms > 0.0 && self.refresh_period_ms > 0.0) {
            return Err(Error::invalid("tick and refresh periods must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerModel {
    pub coeffs: BatchCostCoefficients,
    pub busy_until: f64,
}

impl WorkerModel {
    pub fn new(coeffs: BatchCostCoefficients) -> Self {
        Self {
            coeffs,
            busy_until: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Finished,
    /// Given up by the scheduler before running.
    Dropped,
    /// Ran but completed after the deadline.
    Late,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub app: String,
    pub release: f64,
    pub deadline: f64,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total: usize,
    pub finished_in_time: usize,
    pub finish_rate: f64,
    /// True when the trace was empty and `finish_rate` is vacuous.
    pub vacuous: bool,
    pub dropped: usize,
    pub late: usize,
    pub p50_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub batches: usize,
    pub busy_ms: f64,
    pub makespan_ms: f64,
    pub max_pending: usize,
    pub policy_stats: PolicyStats,
    pub records: Vec<RequestRecord>,
    /// Wall time of each scheduler iterate call, when measured.
    pub iterate_ns: Vec<u64>,
}

impl RunMetrics {
    pub fn utilization(&self) -> f64 {
        if self.makespan_ms > 0.0 {
            self.busy_ms / self.makespan_ms
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Complete,
    Arrival,
    Tick,
    Refresh,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
    payload: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Unreleased,
    Pending,
    Running,
    Done,
}

struct Sim<'a> {
    trace: &'a Trace,
    policy: &'a mut dyn Policy,
    worker: WorkerModel,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    events: BinaryHeap<Event>,
    seq: u64,
    state: Vec<State>,
    records: Vec<RequestRecord>,
    in_flight: Option<Batch>,
    tick_pending: bool,
    last_deadline: f64,
    batches: usize,
    busy_ms: f64,
    max_pending: usize,
    iterate_ns: Vec<u64>,
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: Kind, payload: usize) {
        self.events.push(Event {
            time,
            kind,
            seq: self.seq,
            payload,
        });
        self.seq += 1;
    }

    fn idle(&self) -> bool {
        self.in_flight.is_none()
    }

    /// Decisions wait until every arrival and completion at `now` is in.
    fn more_arrivals_at(&self, now: f64) -> bool {
        self.events
            .peek()
            .is_some_and(|e| e.time == now && e.kind <= Kind::Arrival)
    }

    fn live(&self) -> bool {
        self.in_flight.is_some()
            || self.policy.pending() > 0
            || self.events.iter().any(|e| e.kind == Kind::Arrival)
    }

    fn drain(&mut self) -> Result<()> {
        for id in self.policy.drain_timed_out() {
            let i = id as usize;
            if self.state.get(i) != Some(&State::Pending) {
                return Err(Error::Invariant(format!(
                    "policy timed out request {id} that is not pending"
                )));
            }
            self.state[i] = State::Done;
            self.records[i].outcome = Outcome::Dropped;
        }
        Ok(())
    }

    fn dispatch(&mut self, now: f64) -> Result<()> {
        let started = self.config.measure_overhead.then(Instant::now);
        let batch = self.policy.iterate(now)?;
        if let Some(t0) = started {
            self.iterate_ns.push(t0.elapsed().as_nanos() as u64);
        }
        self.drain()?;
        let Some(batch) = batch else {
            if self.policy.pending() > 0 && !self.tick_pending && now <= self.last_deadline {
                self.tick_pending = true;
                self.push(now + self.config.tick_ms, Kind::Tick, 0);
            }
            return Ok(());
        };
        if batch.requests.is_empty() {
            return Err(Error::Invariant("policy returned an empty batch".into()));
        }
        let mut longest: f64 = 0.0;
        for &id in &batch.requests {
            let i = id as usize;
            if self.state.get(i) != Some(&State::Pending) {
                return Err(Error::Invariant(format!(
                    "batch {} holds request {id} that is not pending",
                    batch.id
                )));
            }
            self.state[i] = State::Running;
            self.records[i].start = Some(now);
            longest = longest.max(self.trace.entries[i].exec_ms);
        }
        let duration = self.worker.coeffs.duration(batch.requests.len(), longest);
        self.worker.busy_until = now + duration;
        self.busy_ms += duration;
        self.batches += 1;
        self.push(now + duration, Kind::Complete, 0);
        self.in_flight = Some(batch);
        Ok(())
    }

    fn complete(&mut self, now: f64) -> Result<()> {
        let batch = self
            .in_flight
            .take()
            .ok_or_else(|| Error::Invariant("completion without a running batch".into()))?;
        for &id in &batch.requests {
            let i = id as usize;
            self.state[i] = State::Done;
            let rec = &mut self.records[i];
            rec.end = Some(now);
            rec.outcome = if now <= rec.deadline {
                Outcome::Finished
            } else {
                Outcome::Late
            };
            if self.rng.random::<f64>() < self.config.profile_rate {
                let e = &self.trace.entries[i];
                self.policy.ingest_profile(&e.app, e.exec_ms, now)?;
            }
        }
        self.policy.on_batch_complete(batch.id, now)?;
        self.drain()
    }

    fn run(mut self) -> Result<RunMetrics> {
        let first = self.trace.entries.first().map_or(0.0, |e| e.arrival_ms);
        for i in 0..self.trace.entries.len() {
            self.push(self.trace.entries[i].arrival_ms, Kind::Arrival, i);
        }
        if !self.trace.entries.is_empty() {
            self.push(first + self.config.refresh_period_ms, Kind::Refresh, 0);
        }
        let mut now = first;
        while let Some(ev) = self.events.pop() {
            if ev.time < now {
                return Err(Error::Invariant("event time went backwards".into()));
            }
            now = ev.time;
            match ev.kind {
                Kind::Complete => self.complete(now)?,
                Kind::Arrival => {
                    let i = ev.payload;
                    let e = &self.trace.entries[i];
                    let req = Request {
                        id: i as RequestId,
                        app: e.app.clone(),
                        release: e.arrival_ms,
                        deadline: e.arrival_ms + e.slo_ms,
                        cost: e.cost,
                    };
                    self.state[i] = State::Pending;
                    self.policy.on_arrival(req, now)?;
                    self.drain()?;
                    self.max_pending = self.max_pending.max(self.policy.pending());
                }
                Kind::Tick => self.tick_pending = false,
                Kind::Refresh => {
                    self.policy.refresh(now)?;
                    self.drain()?;
                    if self.live() {
                        self.push(now + self.config.refresh_period_ms, Kind::Refresh, 0);
                    }
                }
            }
            if self.idle() && !self.more_arrivals_at(now) {
                self.dispatch(now)?;
            }
        }
        // requests the policy never released or dropped
        for (i, s) in self.state.iter_mut().enumerate() {
            match *s {
                State::Pending => {
                    log::warn!("request {i} still pending at end of run; counted as dropped");
                    *s = State::Done;
                    self.records[i].outcome = Outcome::Dropped;
                }
                State::Done => {}
                other => {
                    return Err(Error::Invariant(format!(
                        "request {i} ended the run in state {other:?}"
                    )))
                }
            }
        }
        let total = self.records.len();
        let finished_in_time = self
            .records
            .iter()
            .filter(|r| r.outcome == Outcome::Finished)
            .count();
        let dropped = self
            .records
            .iter()
            .filter(|r| r.outcome == Outcome::Dropped)
            .count();
        let late = total - finished_in_time - dropped;
        let latencies: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.end.map(|e| e - r.release))
            .collect();
        let pct = |q| sample_quantile(&latencies, q).unwrap_or(f64::NAN);
        Ok(RunMetrics {
            total,
            finished_in_time,
            finish_rate: if total == 0 {
                1.0
            } else {
                finished_in_time as f64 / total as f64
            },
            vacuous: total == 0,
            dropped,
            late,
            p50_latency_ms: pct(0.5),
            p99_latency_ms: pct(0.99),
            batches: self.batches,
            busy_ms: self.busy_ms,
            makespan_ms: now - first,
            max_pending: self.max_pending,
            policy_stats: self.policy.stats(),
            records: if self.config.record_requests {
                self.records
            } else {
                Vec::new()
            },
            iterate_ns: self.iterate_ns,
        })
    }
}

/// Replays `trace` against `policy` on a single worker.
pub fn run(
    trace: &Trace,
    policy: &mut dyn Policy,
    worker: WorkerModel,
    config: &SimConfig,
    seed: u64,
) -> Result<RunMetrics> {
    config.validate()?;
    worker.coeffs.validate()?;
    trace.validate()?;
    let records = trace
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| RequestRecord {
            id: i as RequestId,
            app: e.app.clone(),
            release: e.arrival_ms,
            deadline: e.arrival_ms + e.slo_ms,
            start: None,
            end: None,
            outcome: Outcome::Dropped,
        })
        .collect();
    let last_deadline = trace
        .entries
        .iter()
        .map(|e| e.arrival_ms + e.slo_ms)
        .fold(f64::NEG_INFINITY, f64::max);
    Sim {
        trace,
        policy,
        worker,
        config,
        rng: ChaCha8Rng::seed_from_u64(seed),
        events: BinaryHeap::new(),
        seq: 0,
        state: vec![State::Unreleased; trace.entries.len()],
        records,
        in_flight: None,
        tick_pending: false,
        last_deadline,
        batches: 0,
        busy_ms: 0.0,
        max_pending: 0,
        iterate_ns: Vec::new(),
    }
    .run()
}
