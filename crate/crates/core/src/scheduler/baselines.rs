//! Point-estimate schedulers used for comparison. Both predict a batch of
//! `k` requests to take `c0 + c1 * k * mean`, where `mean` is the mean of the
//! profiled execution time distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::Sender;

use ordered_float::OrderedFloat;

use super::{
    Batch, Policy, PolicyStats, ProfileSample, Profiler, Request, RequestId, SchedulerConfig,
};
use crate::dist::{mixture, EmpiricalHistogram};
use crate::error::{Error, Result};

/// Deadline-ordered pending set plus the shared mean-latency model.
#[derive(Debug)]
struct MeanModel {
    config: SchedulerConfig,
    sizes: Vec<usize>,
    queue: BTreeSet<(OrderedFloat<f64>, RequestId)>,
    ids: BTreeMap<RequestId, f64>,
    profiler: Profiler,
    mean: f64,
    timed_out: Vec<RequestId>,
    stats: PolicyStats,
}

impl MeanModel {
    fn new(config: SchedulerConfig) -> Result<Self> {
        config.validate()?;
        let mean = 0.5 * (config.prior_lo_ms + config.prior_hi_ms);
        Ok(Self {
            sizes: config.sorted_sizes(),
            profiler: Profiler::new(config.profile_window_ms, config.hist_bins),
            config,
            queue: BTreeSet::new(),
            ids: BTreeMap::new(),
            mean,
            timed_out: Vec::new(),
            stats: PolicyStats::default(),
        })
    }

    fn est(&self, k: usize) -> f64 {
        self.config.coeffs.duration(k, self.mean)
    }

    fn add(&mut self, r: Request) -> Result<()> {
        r.validate()?;
        if self.ids.insert(r.id, r.deadline).is_some() {
            return Err(Error::invalid(format!("request {} already pending", r.id)));
        }
        self.queue.insert((OrderedFloat(r.deadline), r.id));
        Ok(())
    }

    /// Drops requests that cannot finish by their deadline even alone when
    /// started at `t`, then takes the largest size whose predicted finish
    /// meets the earliest deadline.
    fn select(&mut self, t: f64) -> Option<(Vec<RequestId>, usize)> {
        let smallest = self.sizes[0];
        while let Some(&(d, id)) = self.queue.first() {
            if t + self.est(smallest) <= d.0 {
                break;
            }
            self.queue.pop_first();
            self.ids.remove(&id);
            self.timed_out.push(id);
            self.stats.dropped += 1;
        }
        let &(d0, _) = self.queue.first()?;
        let n = self.queue.len();
        let k = self
            .sizes
            .iter()
            .rev()
            .copied()
            .find(|&k| k <= n && t + self.est(k) <= d0.0)?;
        let ids: Vec<RequestId> = (0..k)
            .map(|_| {
                let (_, id) = self.queue.pop_first().unwrap();
                self.ids.remove(&id);
                id
            })
            .collect();
        Some((ids, k))
    }

    fn refresh(&mut self, now: f64) -> Result<()> {
        self.profiler.apply(now);
        let (hists, weights) = self.profiler.histograms()?;
        self.stats.refreshes += 1;
        if hists.is_empty() {
            self.stats.cold_start_refreshes += 1;
            return Ok(());
        }
        let hs: Vec<&EmpiricalHistogram> = hists.values().collect();
        let ws: Vec<f64> = hists.keys().map(|k| weights[k]).collect();
        self.mean = mixture(&hs, &ws)?.mean()?;
        Ok(())
    }
}

/// Earliest-deadline-first with the largest batch the mean model says fits.
#[derive(Debug)]
pub struct EdfMaxBatch {
    inner: MeanModel,
    next_batch: u64,
}

impl EdfMaxBatch {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        Ok(Self {
            inner: MeanModel::new(config)?,
            next_batch: 0,
        })
    }
}

impl Policy for EdfMaxBatch {
    fn name(&self) -> &'static str {
        "edf_maxbatch"
    }

    fn on_arrival(&mut self, r: Request, _now: f64) -> Result<()> {
        self.inner.add(r)
    }

    fn iterate(&mut self, now: f64) -> Result<Option<Batch>> {
        let Some((ids, k)) = self.inner.select(now) else {
            return Ok(None);
        };
        let batch = Batch {
            id: self.next_batch,
            requests: ids,
            batch_size: k,
            dispatched_at: now,
            estimated_ms: self.inner.est(k),
        };
        self.next_batch += 1;
        self.inner.stats.batches += 1;
        Ok(Some(batch))
    }

    fn on_batch_complete(&mut self, _batch_id: u64, _now: f64) -> Result<()> {
        Ok(())
    }

    fn profile_sender(&self) -> Sender<ProfileSample> {
        self.inner.profiler.sender()
    }

    fn refresh(&mut self, now: f64) -> Result<()> {
        self.inner.refresh(now)
    }

    fn drain_timed_out(&mut self) -> Vec<RequestId> {
        std::mem::take(&mut self.inner.timed_out)
    }

    fn pending(&self) -> usize {
        self.inner.queue.len()
    }

    fn stats(&self) -> PolicyStats {
        self.inner.stats.clone()
    }
}

#[derive(Debug)]
struct Plan {
    requests: Vec<RequestId>,
    bs: usize,
}

/// Plans the next batch at the predicted end of the running one. When the
/// running batch overruns its prediction the planned batch is cancelled and
/// its requests fail.
#[derive(Debug)]
pub struct MeanPlanAhead {
    inner: MeanModel,
    planned: Option<Plan>,
    in_flight: Option<(u64, f64)>,
    next_batch: u64,
}

/// Slack allowed between predicted and actual completion.
const PLAN_TOLERANCE_MS: f64 = 1e-9;

impl MeanPlanAhead {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        Ok(Self {
            inner: MeanModel::new(config)?,
            planned: None,
            in_flight: None,
            next_batch: 0,
        })
    }
}

impl Policy for MeanPlanAhead {
    fn name(&self) -> &'static str {
        "mean_planahead"
    }

    fn on_arrival(&mut self, r: Request, _now: f64) -> Result<()> {
        self.inner.add(r)
    }

    fn iterate(&mut self, now: f64) -> Result<Option<Batch>> {
        let (ids, k) = match self.planned.take() {
            Some(plan) => (plan.requests, plan.bs),
            None => match self.inner.select(now) {
                Some(sel) => sel,
                None => return Ok(None),
            },
        };
        let est = self.inner.est(k);
        let batch = Batch {
            id: self.next_batch,
            requests: ids,
            batch_size: k,
            dispatched_at: now,
            estimated_ms: est,
        };
        self.next_batch += 1;
        self.inner.stats.batches += 1;
        let end = now + est;
        self.in_flight = Some((batch.id, end));
        self.planned = self
            .inner
            .select(end)
            .map(|(requests, bs)| Plan { requests, bs });
        Ok(Some(batch))
    }

    fn on_batch_complete(&mut self, batch_id: u64, now: f64) -> Result<()> {
        if let Some((id, end)) = self.in_flight {
            if id == batch_id {
                self.in_flight = None;
                if now > end + PLAN_TOLERANCE_MS {
                    if let Some(plan) = self.planned.take() {
                        self.inner.stats.plan_cancellations += 1;
                        self.inner.stats.dropped += plan.requests.len() as u64;
                        self.inner.timed_out.extend(plan.requests);
                    }
                }
            }
        }
        Ok(())
    }

    fn profile_sender(&self) -> Sender<ProfileSample> {
        self.inner.profiler.sender()
    }

    fn refresh(&mut self, now: f64) -> Result<()> {
        self.inner.refresh(now)
    }

    fn drain_timed_out(&mut self) -> Vec<RequestId> {
        std::mem::take(&mut self.inner.timed_out)
    }

    fn pending(&self) -> usize {
        self.inner.queue.len() + self.planned.as_ref().map_or(0, |p| p.requests.len())
    }

    fn stats(&self) -> PolicyStats {
        self.inner.stats.clone()
    }
}
