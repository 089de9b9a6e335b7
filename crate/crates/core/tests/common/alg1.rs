//! Naive step-by-step scheduling loop for point-mass latency models: every
//! decision recomputes drops and scores from scratch, with no hulls,
//! trackers or milestones.

use std::collections::{BTreeMap, BTreeSet};

use orloj::dist::{BatchCostCoefficients, EmpiricalHistogram};
use orloj::scheduler::{refresh_batch_models, Orloj, Policy, Request, SchedulerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Instance {
    pub sizes: Vec<usize>,
    pub exec: f64,
    pub coeffs: BatchCostCoefficients,
    pub b: f64,
    /// (release, deadline, penalty) per request; ids are indices.
    pub requests: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Idle,
    Batch { bs: usize, ids: Vec<u64> },
}

pub struct Reference {
    inst: Instance,
    /// Feasible sizes per pending request.
    pending: BTreeMap<u64, BTreeSet<usize>>,
    pub dropped: Vec<u64>,
}

impl Reference {
    pub fn new(inst: Instance) -> Self {
        Self {
            inst,
            pending: BTreeMap::new(),
            dropped: Vec::new(),
        }
    }

    pub fn latency(&self, bs: usize) -> f64 {
        self.inst.coeffs.c0 + self.inst.coeffs.c1 * bs as f64 * self.inst.exec
    }

    pub fn arrive(&mut self, id: u64) {
        self.pending
            .insert(id, self.inst.sizes.iter().copied().collect());
    }

    /// Score of a request whose batch takes exactly `e`: the delayed run
    /// misses the deadline with probability exp(-b * slack), the immediate
    /// one never does; zero once the slack is gone.
    fn score(&self, id: u64, e: f64, now: f64) -> f64 {
        let (_, d, c) = self.inst.requests[id as usize];
        let slack = d - now - e;
        if slack <= 0.0 {
            0.0
        } else {
            c / e * (-self.inst.b * slack).exp()
        }
    }

    pub fn iterate(&mut self, now: f64) -> Decision {
        let mut sizes = self.inst.sizes.clone();
        sizes.sort_unstable();
        for &bs in &sizes {
            let e = self.latency(bs);
            for (&id, set) in self.pending.iter_mut() {
                if set.contains(&bs) && now + e > self.inst.requests[id as usize].1 {
                    set.remove(&bs);
                }
            }
        }
        let gone: Vec<u64> = self
            .pending
            .iter()
            .filter(|(_, s)| s.is_empty())
            .map(|(&id, _)| id)
            .collect();
        for id in gone {
            self.pending.remove(&id);
            self.dropped.push(id);
        }
        // earliest deadline among queues holding enough requests; ties go to
        // the larger size
        let mut best: Option<(f64, usize)> = None;
        for &bs in &sizes {
            let members: Vec<u64> = self.members(bs);
            if members.len() < bs {
                continue;
            }
            let d = members
                .iter()
                .map(|&id| self.inst.requests[id as usize].1)
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| d <= bd) {
                best = Some((d, bs));
            }
        }
        let Some((_, bs)) = best else {
            return Decision::Idle;
        };
        let e = self.latency(bs);
        let mut scored: Vec<(f64, u64)> = self
            .members(bs)
            .into_iter()
            .map(|id| (self.score(id, e, now), id))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let ids: Vec<u64> = scored.into_iter().take(bs).map(|(_, id)| id).collect();
        for id in &ids {
            self.pending.remove(id);
        }
        Decision::Batch { bs, ids }
    }

    fn members(&self, bs: usize) -> Vec<u64> {
        self.pending
            .iter()
            .filter(|(_, s)| s.contains(&bs))
            .map(|(&id, _)| id)
            .collect()
    }
}

pub fn orloj_for(inst: &Instance) -> Orloj {
    let cfg = SchedulerConfig {
        batch_sizes: inst.sizes.clone(),
        coeffs: inst.coeffs,
        b: inst.b,
        ..Default::default()
    };
    let mut o = Orloj::new(cfg.clone()).unwrap();
    let mut hists = BTreeMap::new();
    hists.insert(
        "a".to_string(),
        EmpiricalHistogram::point_mass(inst.exec).unwrap(),
    );
    let models = refresh_batch_models(
        &hists,
        &BTreeMap::new(),
        &cfg.sorted_sizes(),
        cfg.coeffs,
        &EmpiricalHistogram::uniform(1.0, 100.0).unwrap(),
        cfg.score_bins,
    )
    .unwrap();
    o.set_batch_models(models, 0.0).unwrap();
    o
}

/// Replays `inst` against both implementations on a one-worker timeline
/// sampled every millisecond; returns the decision count or the first
/// disagreement.
pub fn compare(inst: &Instance) -> Result<usize, String> {
    let mut o = orloj_for(inst);
    let mut r = Reference::new(inst.clone());
    let horizon = inst.requests.iter().map(|q| q.1).fold(0.0, f64::max) + 100.0;
    let mut next = 0;
    let mut decisions = 0;
    let mut busy_until = 0.0;
    let mut t = 0.0;
    while t <= horizon {
        while next < inst.requests.len() && inst.requests[next].0 <= t {
            let (rel, d, c) = inst.requests[next];
            let mut req = Request::new(next as u64, "a", rel, d - rel);
            req.cost = c;
            o.on_arrival(req, t).map_err(|e| e.to_string())?;
            r.arrive(next as u64);
            next += 1;
        }
        if t >= busy_until {
            let got = match o.iterate(t).map_err(|e| e.to_string())? {
                None => Decision::Idle,
                Some(b) => Decision::Batch {
                    bs: b.batch_size,
                    ids: b.requests,
                },
            };
            let want = r.iterate(t);
            let mut dropped = o.drain_timed_out();
            dropped.sort_unstable();
            let mut want_dropped = std::mem::take(&mut r.dropped);
            want_dropped.sort_unstable();
            if got != want || dropped != want_dropped {
                return Err(format!(
                    "t={t}: orloj {got:?} dropped {dropped:?}, reference {want:?} dropped {want_dropped:?}"
                ));
            }
            decisions += 1;
            if let Decision::Batch { bs, .. } = got {
                busy_until = t + r.latency(bs);
            }
        }
        o.check_consistency()?;
        t += 1.0;
    }
    Ok(decisions)
}

/// Deterministic suite of small instances covering size sets, overheads,
/// penalties and staggered releases.
pub fn suite() -> Vec<Instance> {
    let size_sets: [&[usize]; 6] = [&[1], &[2], &[1, 2], &[1, 3], &[2, 4], &[1, 4]];
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A1);
    for sizes in size_sets {
        for &exec in &[5.0, 12.0] {
            for &(c0, c1) in &[(0.0, 1.0), (3.0, 0.5)] {
                for _ in 0..10 {
                    let n = rng.random_range(1..=6);
                    let requests = (0..n)
                        .scan(0.0, |rel, _| {
                            *rel += rng.random_range(0..4) as f64;
                            let d = *rel + rng.random_range(5..60) as f64;
                            let c = [1.0, 1.0, 2.0, 3.0][rng.random_range(0..4)];
                            Some((*rel, d, c))
                        })
                        .collect();
                    out.push(Instance {
                        sizes: sizes.to_vec(),
                        exec,
                        coeffs: BatchCostCoefficients::new(c0, c1).unwrap(),
                        b: [1e-4, 1e-2][rng.random_range(0..2)],
                        requests,
                    });
                }
            }
        }
    }
    out
}
