//! Long single-worker run used to exercise score rebasing.

use std::collections::BTreeMap;

use orloj::dist::{BatchCostCoefficients, EmpiricalHistogram};
use orloj::scheduler::{refresh_batch_models, Orloj, Policy, Request, SchedulerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Default)]
pub struct LongRun {
    pub decisions: usize,
    pub rebases: u64,
    /// Batches popped at least once after a rebase and checked against a
    /// from-scratch ranking.
    pub checked_after_rebase: usize,
    pub max_pending: usize,
}

/// Runs `seconds` of Poisson arrivals through Orloj with score parameter
/// `b`. After every decision all queue scores must be finite and match a
/// from-scratch evaluation; every popped batch must be a top-k set under
/// from-scratch scores.
pub fn run(seconds: f64, b: f64, seed: u64) -> Result<LongRun, String> {
    let sizes = vec![1, 2, 4, 8];
    let cfg = SchedulerConfig {
        batch_sizes: sizes.clone(),
        coeffs: BatchCostCoefficients::new(0.0, 1.0).unwrap(),
        b,
        ..Default::default()
    };
    let exec =
        EmpiricalHistogram::new(vec![40.0, 60.0, 190.0, 210.0], vec![1.0, 0.0, 1.0]).unwrap();
    let mut hists = BTreeMap::new();
    hists.insert("a".to_string(), exec.clone());
    let models = refresh_batch_models(
        &hists,
        &BTreeMap::new(),
        &sizes,
        cfg.coeffs,
        &EmpiricalHistogram::uniform(1.0, 100.0).unwrap(),
        cfg.score_bins,
    )
    .map_err(|e| e.to_string())?;
    let mut o = Orloj::new(cfg).map_err(|e| e.to_string())?;
    o.set_batch_models(models, 0.0).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::<f64>::new(6.0 / 1000.0).unwrap();
    let horizon = seconds * 1000.0;
    let mut next_arrival = gap.sample(&mut rng);
    let mut busy_until = 0.0f64;
    let mut waiting = false;
    let mut id = 0u64;
    let mut out = LongRun::default();
    let mut last_rebases = 0;
    let mut since_rebase = usize::MAX;
    loop {
        let free = if waiting { f64::INFINITY } else { busy_until };
        let now = next_arrival.min(free);
        if now > horizon {
            break;
        }
        if next_arrival <= free {
            o.on_arrival(Request::new(id, "a", now, 3.0 * 210.0), now)
                .map_err(|e| e.to_string())?;
            id += 1;
            next_arrival += gap.sample(&mut rng);
            if waiting {
                waiting = false;
                busy_until = now;
            }
            continue;
        }
        let mut expected: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
        for &bs in &sizes {
            let est = o.estimate_batch_latency(bs).unwrap();
            let mut scored = Vec::new();
            for (rid, _) in o.current_scores(bs, now).map_err(|e| e.to_string())? {
                let fresh = o.reference_score(rid, bs, now).map_err(|e| e.to_string())?;
                scored.push((rid, fresh));
            }
            // the drop pass removes these from this queue first
            scored.retain(|&(rid, _)| o.deadline_of(rid).is_some_and(|d| now + est <= d));
            expected.insert(bs, scored);
        }
        out.max_pending = out.max_pending.max(o.pending());
        let batch = o.iterate(now).map_err(|e| e.to_string())?;
        o.drain_timed_out();
        out.decisions += 1;
        // pieces are current once the step has run
        for &bs in &sizes {
            for (rid, fast) in o.current_scores(bs, now).map_err(|e| e.to_string())? {
                let fresh = o.reference_score(rid, bs, now).map_err(|e| e.to_string())?;
                if !fast.is_finite() || (fast - fresh).abs() > 1e-9 * fresh.abs() + 1e-300 {
                    return Err(format!(
                        "score for {rid} at {now}: hull {fast}, fresh {fresh}"
                    ));
                }
            }
        }
        let stats = o.stats();
        if stats.rebases > last_rebases {
            last_rebases = stats.rebases;
            since_rebase = 0;
        }
        let Some(batch) = batch else {
            waiting = true;
            continue;
        };
        let members = &expected[&batch.batch_size];
        let kth = batch
            .requests
            .iter()
            .map(|r| members.iter().find(|m| m.0 == *r).map(|m| m.1))
            .collect::<Option<Vec<f64>>>()
            .ok_or(format!("popped request not in queue at {now}"))?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let better = members
            .iter()
            .filter(|m| !batch.requests.contains(&m.0))
            .any(|m| m.1 > kth * (1.0 + 1e-9));
        if better {
            return Err(format!("batch at {now} skipped a higher score"));
        }
        if since_rebase < 50 {
            out.checked_after_rebase += 1;
        }
        since_rebase = since_rebase.saturating_add(1);
        let solo = if rng.random_bool(0.5) { 50.0 } else { 200.0 };
        busy_until = now + batch.batch_size as f64 * solo;
        o.check_consistency()?;
    }
    out.rebases = o.stats().rebases;
    Ok(out)
}
