use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::Sender;

use ordered_float::OrderedFloat;

use super::{
    refresh_batch_models, Batch, BatchModels, CandidateOrder, DeadlineTracker, LatencyEstimate,
    Policy, PolicyStats, ProfileSample, Profiler, Request, RequestId, SchedulerConfig,
};
use crate::cost::{ScoreKernel, ScoreParams, StepCostFunction};
use crate::dist::{BatchLatencyModel, EmpiricalHistogram};
use crate::error::{Error, Result};
use crate::hull::{new_queue, HullPoint, KineticQueue};

/// Everything kept for one supported batch size.
#[derive(Debug)]
struct Slot {
    bs: usize,
    model: BatchLatencyModel,
    kernel: ScoreKernel,
    estimate: f64,
    hull: Box<dyn KineticQueue>,
    tracker: DeadlineTracker,
}

#[derive(Debug)]
struct Entry {
    req: Request,
    member: Vec<bool>,
    /// Relative time of the next piece change per slot.
    milestone: Vec<f64>,
}

/// The distribution-aware scheduler: one hull queue and one deadline
/// tracker per batch size, scores from precomputed batch latency models.
#[derive(Debug)]
pub struct Orloj {
    config: SchedulerConfig,
    params: ScoreParams,
    slots: Vec<Slot>,
    entries: BTreeMap<RequestId, Entry>,
    milestones: BTreeSet<(OrderedFloat<f64>, RequestId, usize)>,
    profiler: Profiler,
    prior: EmpiricalHistogram,
    cold_start: bool,
    timed_out: Vec<RequestId>,
    next_batch: u64,
    stats: PolicyStats,
}

fn estimate_of(model: &BatchLatencyModel, how: LatencyEstimate) -> Result<f64> {
    match how {
        LatencyEstimate::Expectation => Ok(model.expectation),
        LatencyEstimate::Quantile(q) => model.pdf_hist.quantile(q),
    }
}

impl Orloj {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        config.validate()?;
        let prior = EmpiricalHistogram::uniform(config.prior_lo_ms, config.prior_hi_ms)?;
        let models = refresh_batch_models(
            &BTreeMap::new(),
            &BTreeMap::new(),
            &config.sorted_sizes(),
            config.coeffs,
            &prior,
            config.score_bins,
        )?;
        let mut slots = Vec::new();
        for (&bs, model) in &models.by_size {
            slots.push(Slot {
                bs,
                kernel: ScoreKernel::new(model)?,
                estimate: estimate_of(model, config.estimate)?,
                model: model.clone(),
                hull: new_queue(&config.queue)?,
                tracker: DeadlineTracker::new(),
            });
        }
        Ok(Self {
            params: ScoreParams::new(config.b, 0.0)?,
            profiler: Profiler::new(config.profile_window_ms, config.hist_bins),
            config,
            slots,
            entries: BTreeMap::new(),
            milestones: BTreeSet::new(),
            prior,
            cold_start: true,
            timed_out: Vec::new(),
            next_batch: 0,
            stats: PolicyStats::default(),
        })
    }

    pub fn params(&self) -> ScoreParams {
        self.params
    }

    pub fn is_cold(&self) -> bool {
        self.cold_start
    }

    pub fn batch_models(&self) -> BTreeMap<usize, BatchLatencyModel> {
        self.slots.iter().map(|s| (s.bs, s.model.clone())).collect()
    }

    /// The drop-test statistic of the batch latency for size `bs`.
    pub fn estimate_batch_latency(&self, bs: usize) -> Option<f64> {
        self.slot_index(bs).map(|i| self.slots[i].estimate)
    }

    /// Installs latency models directly, bypassing the profiler.
    pub fn set_batch_models(&mut self, models: BatchModels, now: f64) -> Result<()> {
        for slot in &mut self.slots {
            let model = models
                .by_size
                .get(&slot.bs)
                .ok_or_else(|| Error::invalid(format!("no model for batch size {}", slot.bs)))?;
            slot.kernel = ScoreKernel::new(model)?;
            slot.estimate = estimate_of(model, self.config.estimate)?;
            slot.model = model.clone();
        }
        self.cold_start = models.cold_start;
        self.with_overflow_retry(now, |s| {
            s.ensure_base(now)?;
            s.rebuild(now)
        })
    }

    fn slot_index(&self, bs: usize) -> Option<usize> {
        self.slots.iter().position(|s| s.bs == bs)
    }

    /// Members of the queue for `bs` with their current scores at `now`.
    pub fn current_scores(&self, bs: usize, now: f64) -> Result<Vec<(RequestId, f64)>> {
        let i = self
            .slot_index(bs)
            .ok_or_else(|| Error::invalid(format!("unsupported batch size {bs}")))?;
        let g = self.params.growth(self.params.rel(now))?;
        let mut out: Vec<(RequestId, f64)> = self
            .entries
            .iter()
            .filter(|(_, e)| e.member[i])
            .map(|(&id, _)| {
                let p = self.slots[i]
                    .hull
                    .get(id)
                    .expect("member missing from hull");
                (id, p.value(g))
            })
            .collect();
        out.sort_by_key(|&(id, _)| id);
        Ok(out)
    }

    /// Score of `id` for `bs` at `now` evaluated from scratch.
    pub fn reference_score(&self, id: RequestId, bs: usize, now: f64) -> Result<f64> {
        let i = self
            .slot_index(bs)
            .ok_or_else(|| Error::invalid(format!("unsupported batch size {bs}")))?;
        let e = self.entries.get(&id).ok_or(Error::NotFound(id))?;
        let cost = self.cost_rel(&e.req);
        self.slots[i]
            .kernel
            .score(&cost, self.params.rel(now), &self.params)
    }

    pub fn deadline_of(&self, id: RequestId) -> Option<f64> {
        self.entries.get(&id).map(|e| e.req.deadline)
    }

    pub fn queue_len(&self, bs: usize) -> usize {
        self.slot_index(bs).map_or(0, |i| self.slots[i].hull.len())
    }

    /// Checks that every queue's hull and tracker hold the same requests
    /// and that every pending request belongs to at least one queue.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (i, slot) in self.slots.iter().enumerate() {
            slot.hull.validate()?;
            if slot.hull.len() != slot.tracker.len() {
                return Err(format!(
                    "bs {}: hull holds {}, tracker holds {}",
                    slot.bs,
                    slot.hull.len(),
                    slot.tracker.len()
                ));
            }
            for (d, id) in slot.tracker.iter() {
                let e = self
                    .entries
                    .get(&id)
                    .ok_or(format!("tracker holds unknown {id}"))?;
                if !e.member[i] || !slot.hull.contains(id) || e.req.deadline != d {
                    return Err(format!("bs {}: request {id} out of sync", slot.bs));
                }
            }
        }
        for (id, e) in &self.entries {
            if !e.member.iter().any(|&m| m) {
                return Err(format!("pending request {id} belongs to no queue"));
            }
        }
        Ok(())
    }

    fn cost_rel(&self, r: &Request) -> StepCostFunction {
        StepCostFunction {
            deadline: self.params.rel(r.deadline),
            penalty: r.cost,
        }
    }

    fn place(&mut self, id: RequestId, i: usize, now: f64) -> Result<()> {
        let t = self.params.rel(now);
        let e = self.entries.get(&id).ok_or(Error::NotFound(id))?;
        let cost = self.cost_rel(&e.req);
        let piece = self.slots[i].kernel.piece_at(&cost, t, &self.params, id)?;
        self.slots[i]
            .hull
            .insert(HullPoint::new(piece.alpha, piece.beta, id))?;
        let e = self.entries.get_mut(&id).unwrap();
        e.milestone[i] = piece.valid_until;
        if piece.valid_until.is_finite() {
            self.milestones
                .insert((OrderedFloat(piece.valid_until), id, i));
        }
        Ok(())
    }

    fn unplace(&mut self, id: RequestId, i: usize) {
        let slot = &mut self.slots[i];
        if slot.hull.contains(id) {
            slot.hull.remove(id).expect("hull lost a member");
        }
        if let Some(e) = self.entries.get_mut(&id) {
            self.milestones
                .remove(&(OrderedFloat(e.milestone[i]), id, i));
            e.milestone[i] = f64::INFINITY;
        }
    }

    /// Recomputes every piece at `now` into fresh hulls.
    fn rebuild(&mut self, now: f64) -> Result<()> {
        self.milestones.clear();
        for slot in &mut self.slots {
            slot.hull = new_queue(&self.config.queue)?;
        }
        let work: Vec<(RequestId, usize)> = self
            .entries
            .iter()
            .flat_map(|(&id, e)| {
                e.member
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(move |(i, _)| (id, i))
            })
            .collect();
        for (id, i) in work {
            self.place(id, i, now)?;
        }
        Ok(())
    }

    fn ensure_base(&mut self, now: f64) -> Result<()> {
        if self.params.needs_rebase(now) {
            self.rebase(now)?;
        }
        Ok(())
    }

    fn rebase(&mut self, now: f64) -> Result<()> {
        let new_base = now.max(self.params.base_time);
        self.params = self.params.rebase(new_base)?;
        self.stats.rebases += 1;
        log::debug!("rebased score time to {new_base}");
        self.rebuild(now)
    }

    fn update_milestones(&mut self, now: f64) -> Result<()> {
        let t = self.params.rel(now);
        while let Some(&(m, id, i)) = self.milestones.first() {
            if m.0 > t {
                break;
            }
            self.milestones.pop_first();
            self.slots[i].hull.remove(id)?;
            self.place(id, i, now)?;
            self.stats.milestone_updates += 1;
        }
        Ok(())
    }

    fn drop_pass(&mut self, now: f64) {
        for i in 0..self.slots.len() {
            let est = self.slots[i].estimate;
            while let Some((d, id)) = self.slots[i].tracker.min() {
                if now + est <= d {
                    break;
                }
                self.slots[i].tracker.remove(d, id);
                self.unplace(id, i);
                let e = self.entries.get_mut(&id).expect("tracked request missing");
                e.member[i] = false;
                if !e.member.iter().any(|&m| m) {
                    self.entries.remove(&id);
                    self.timed_out.push(id);
                    self.stats.dropped += 1;
                }
            }
        }
    }

    fn candidate(&self) -> Option<usize> {
        let feasible = self
            .slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.hull.len() >= s.bs)
            .map(|(i, s)| (i, s.tracker.min().expect("non-empty tracker").0, s.bs));
        match self.config.candidate_order {
            CandidateOrder::EarliestDeadline => feasible
                .min_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
                .map(|c| c.0),
            CandidateOrder::Descending => feasible
                .max_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)))
                .map(|c| c.0),
        }
    }

    fn pop_batch(&mut self, i: usize, now: f64) -> Result<Batch> {
        let slope = self.params.growth(self.params.rel(now))?;
        let bs = self.slots[i].bs;
        let top = self.slots[i].hull.pop_top_k(bs, slope)?;
        let mut ids = Vec::with_capacity(bs);
        for p in top {
            let id = p.key;
            let e = self.entries.get(&id).ok_or(Error::NotFound(id))?;
            let (d, member) = (e.req.deadline, e.member.clone());
            self.milestones
                .remove(&(OrderedFloat(e.milestone[i]), id, i));
            self.slots[i].tracker.remove(d, id);
            for (j, m) in member.into_iter().enumerate() {
                if m && j != i {
                    self.slots[j].tracker.remove(d, id);
                    self.unplace(id, j);
                }
            }
            self.entries.remove(&id);
            ids.push(id);
        }
        let batch = Batch {
            id: self.next_batch,
            requests: ids,
            batch_size: bs,
            dispatched_at: now,
            estimated_ms: self.slots[i].model.expectation,
        };
        self.next_batch += 1;
        self.stats.batches += 1;
        Ok(batch)
    }

    fn step(&mut self, now: f64) -> Result<Option<Batch>> {
        self.ensure_base(now)?;
        self.update_milestones(now)?;
        self.drop_pass(now);
        match self.candidate() {
            Some(i) => self.pop_batch(i, now).map(Some),
            None => Ok(None),
        }
    }

    /// Runs `f`; on overflow moves the base to `now`, rebuilds and tries once
    /// more.
    fn with_overflow_retry<T>(
        &mut self,
        now: f64,
        mut f: impl FnMut(&mut Self) -> Result<T>,
    ) -> Result<T> {
        match f(self) {
            Err(Error::Overflow(msg)) => {
                log::warn!("overflow ({msg}); rebasing at {now}");
                self.stats.overflow_retries += 1;
                self.rebase(now)?;
                f(self)
            }
            other => other,
        }
    }
}

impl Policy for Orloj {
    fn name(&self) -> &'static str {
        "orloj"
    }

    fn on_arrival(&mut self, r: Request, now: f64) -> Result<()> {
        r.validate()?;
        if self.entries.contains_key(&r.id) {
            return Err(Error::invalid(format!("request {} already pending", r.id)));
        }
        let id = r.id;
        let n = self.slots.len();
        for slot in &mut self.slots {
            slot.tracker.insert(r.deadline, id);
        }
        self.entries.insert(
            id,
            Entry {
                req: r,
                member: vec![true; n],
                milestone: vec![f64::INFINITY; n],
            },
        );
        self.with_overflow_retry(now, |s| {
            s.ensure_base(now)?;
            for i in 0..n {
                if !s.slots[i].hull.contains(id) {
                    s.place(id, i, now)?;
                }
            }
            Ok(())
        })
    }

    fn iterate(&mut self, now: f64) -> Result<Option<Batch>> {
        self.with_overflow_retry(now, |s| s.step(now))
    }

    fn on_batch_complete(&mut self, _batch_id: u64, _now: f64) -> Result<()> {
        Ok(())
    }

    fn profile_sender(&self) -> Sender<ProfileSample> {
        self.profiler.sender()
    }

    fn refresh(&mut self, now: f64) -> Result<()> {
        self.profiler.apply(now);
        let (hists, weights) = self.profiler.histograms()?;
        let models = refresh_batch_models(
            &hists,
            &weights,
            &self.config.sorted_sizes(),
            self.config.coeffs,
            &self.prior,
            self.config.score_bins,
        )?;
        self.stats.refreshes += 1;
        if models.cold_start {
            self.stats.cold_start_refreshes += 1;
        }
        self.set_batch_models(models, now)
    }

    fn drain_timed_out(&mut self) -> Vec<RequestId> {
        std::mem::take(&mut self.timed_out)
    }

    fn pending(&self) -> usize {
        self.entries.len()
    }

    fn stats(&self) -> PolicyStats {
        self.stats.clone()
    }
}
