//! Scheduling policies behind a common interface.
//!
//! A policy sees request metadata (release, deadline, penalty, application)
//! and asynchronous profile samples, never a request's true execution time.

mod baselines;
mod deadline;
mod orloj;
mod profiler;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc::Sender;

use serde::{Deserialize, Serialize};

use crate::dist::BatchCostCoefficients;
use crate::error::{Error, Result};

pub use baselines::{EdfMaxBatch, MeanPlanAhead};
pub use deadline::DeadlineTracker;
pub use orloj::Orloj;
pub use profiler::{refresh_batch_models, BatchModels, ProfileSample, Profiler};

pub type RequestId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub app: String,
    pub release: f64,
    pub deadline: f64,
    pub cost: f64,
}

impl Request {
    pub fn new(id: RequestId, app: impl Into<String>, release: f64, slo: f64) -> Self {
        Self {
            id,
            app: app.into(),
            release,
            deadline: release + slo,
            cost: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.release.is_finite() && self.deadline.is_finite()) {
            return Err(Error::invalid(format!(
                "request {} has non-finite times",
                self.id
            )));
        }
        if self.deadline <= self.release {
            return Err(Error::invalid(format!(
                "request {} deadline {} not after release {}",
                self.id, self.deadline, self.release
            )));
        }
        if !(self.cost > 0.0 && self.cost.is_finite()) {
            return Err(Error::invalid(format!(
                "request {} cost must be > 0",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Pending,
    Running,
    Finished,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub id: u64,
    pub requests: Vec<RequestId>,
    /// Batch size the requests were selected for.
    pub batch_size: usize,
    pub dispatched_at: f64,
    /// The policy's own duration estimate.
    pub estimated_ms: f64,
}

/// Statistic of the batch latency used by drop and feasibility tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyEstimate {
    Expectation,
    Quantile(f64),
}

/// How the batch size to serve is picked among sizes with enough requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrder {
    /// Earliest queue deadline, ties to the larger size.
    EarliestDeadline,
    /// `(deadline, size)` in descending order.
    Descending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub batch_sizes: Vec<usize>,
    pub coeffs: BatchCostCoefficients,
    pub b: f64,
    pub refresh_period_ms: f64,
    pub profile_window_ms: f64,
    pub estimate: LatencyEstimate,
    pub candidate_order: CandidateOrder,
    pub prior_lo_ms: f64,
    pub prior_hi_ms: f64,
    pub hist_bins: usize,
    /// Bins kept in each batch latency histogram used for scoring.
    pub score_bins: usize,
    pub queue: String,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            batch_sizes: vec![1, 2, 4, 8],
            coeffs: BatchCostCoefficients::default(),
            b: crate::cost::DEFAULT_B,
            refresh_period_ms: 1000.0,
            profile_window_ms: 120_000.0,
            estimate: LatencyEstimate::Expectation,
            candidate_order: CandidateOrder::EarliestDeadline,
            prior_lo_ms: 1.0,
            prior_hi_ms: 100.0,
            hist_bins: crate::dist::DEFAULT_BINS,
            score_bins: crate::dist::DEFAULT_BINS,
            queue: "hull".into(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::invalid(
                "batch sizes must be a non-empty set of positive sizes",
            ));
        }
        let mut s = self.batch_sizes.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.batch_sizes.len() {
            return Err(Error::invalid("batch sizes must be distinct"));
        }
        self.coeffs.validate()?;
        crate::cost::ScoreParams::new(self.b, 0.0)?;
        if !(self.refresh_period_ms > 0.0 && self.profile_window_ms > 0.0) {
            return Err(Error::invalid(
                "refresh period and profile window must be > 0",
            ));
        }
        if let LatencyEstimate::Quantile(q) = self.estimate {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::invalid(format!(
                    "estimate quantile {q} outside [0, 1]"
                )));
            }
        }
        if !(self.prior_lo_ms >= 0.0 && self.prior_hi_ms > self.prior_lo_ms) {
            return Err(Error::invalid("cold-start prior needs 0 <= lo < hi"));
        }
        if self.hist_bins == 0 || self.score_bins == 0 {
            return Err(Error::invalid("bin counts must be positive"));
        }
        crate::hull::new_queue(&self.queue)?;
        Ok(())
    }

    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.batch_sizes.clone();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub batches: u64,
    pub dropped: u64,
    pub rebases: u64,
    pub milestone_updates: u64,
    pub refreshes: u64,
    pub cold_start_refreshes: u64,
    pub overflow_retries: u64,
    pub plan_cancellations: u64,
}

/// A batch scheduling policy driven by the simulator.
pub trait Policy: Send + fmt::Debug {
    fn name(&self) -> &'static str;

    fn on_arrival(&mut self, r: Request, now: f64) -> Result<()>;

    /// Called whenever the worker is idle; returns the next batch to run.
    fn iterate(&mut self, now: f64) -> Result<Option<Batch>>;

    fn on_batch_complete(&mut self, batch_id: u64, now: f64) -> Result<()>;

    /// Channel through which profile samples reach the policy. Samples are
    /// applied only at the next [`refresh`](Policy::refresh).
    fn profile_sender(&self) -> Sender<ProfileSample>;

    fn ingest_profile(&self, app: &str, observed_solo_exec: f64, now: f64) -> Result<()> {
        if !(observed_solo_exec > 0.0 && observed_solo_exec.is_finite()) {
            return Err(Error::invalid("profile samples must be > 0"));
        }
        self.profile_sender()
            .send(ProfileSample {
                app: app.to_string(),
                exec_ms: observed_solo_exec,
                at: now,
            })
            .map_err(|_| Error::Invariant("profile channel closed".into()))
    }

    /// Applies queued profile samples and recomputes latency models.
    fn refresh(&mut self, now: f64) -> Result<()>;

    /// Requests given up since the last call.
    fn drain_timed_out(&mut self) -> Vec<RequestId>;

    fn pending(&self) -> usize;

    fn stats(&self) -> PolicyStats;
}

type PolicyFactory = fn(&SchedulerConfig) -> Result<Box<dyn Policy>>;

fn registry() -> BTreeMap<&'static str, PolicyFactory> {
    let mut reg: BTreeMap<&'static str, PolicyFactory> = BTreeMap::new();
    reg.insert("orloj", |c| Ok(Box::new(Orloj::new(c.clone())?)));
    reg.insert("edf_maxbatch", |c| {
        Ok(Box::new(EdfMaxBatch::new(c.clone())?))
    });
    reg.insert("mean_planahead", |c| {
        Ok(Box::new(MeanPlanAhead::new(c.clone())?))
    });
    reg
}

pub fn policy_names() -> Vec<&'static str> {
    registry().into_keys().collect()
}

pub fn new_policy(name: &str, config: &SchedulerConfig) -> Result<Box<dyn Policy>> {
    let factory = *registry()
        .get(name)
        .ok_or_else(|| Error::invalid(format!("unknown policy `{name}`")))?;
    factory(config)
}
