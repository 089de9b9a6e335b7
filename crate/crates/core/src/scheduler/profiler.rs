use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};

use crate::dist::{
    batch_latency, max_order_iid, mixture, BatchCostCoefficients, BatchLatencyModel,
    EmpiricalHistogram,
};
use crate::error::Result;

/// Solo execution time of one completed request, measured off the critical
/// path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub app: String,
    pub exec_ms: f64,
    pub at: f64,
}

/// Latency models for every supported batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchModels {
    pub by_size: BTreeMap<usize, BatchLatencyModel>,
    /// Per-request distribution all models were derived from.
    pub request_dist: EmpiricalHistogram,
    /// True when no profile data existed and the prior was used.
    pub cold_start: bool,
}

/// Builds the batch latency model of each size in `sizes`: the request
/// distribution is the weighted mixture of all application histograms, a
/// batch of `k` pads to the maximum of `k` independent mixture draws, and
/// the batch cost model maps that maximum to a duration. Histograms are
/// then re-binned to `score_bins` bins. Without any non-empty histogram the
/// `prior` stands in for the request distribution.
pub fn refresh_batch_models(
    app_hists: &BTreeMap<String, EmpiricalHistogram>,
    app_weights: &BTreeMap<String, f64>,
    sizes: &[usize],
    coeffs: BatchCostCoefficients,
    prior: &EmpiricalHistogram,
    score_bins: usize,
) -> Result<BatchModels> {
    let mut hists = Vec::new();
    let mut weights = Vec::new();
    for (app, h) in app_hists {
        let w = app_weights.get(app).copied().unwrap_or(h.total());
        if !h.is_empty() && w > 0.0 {
            hists.push(h);
            weights.push(w);
        }
    }
    let cold_start = hists.is_empty();
    let request_dist = if cold_start {
        prior.clone()
    } else {
        mixture(&hists, &weights)?
    };
    let mut by_size = BTreeMap::new();
    for &k in sizes {
        let model = batch_latency(&max_order_iid(&request_dist, k)?, k, coeffs)?;
        by_size.insert(k, model.coarsen(score_bins)?);
    }
    Ok(BatchModels {
        by_size,
        request_dist,
        cold_start,
    })
}

/// Sliding-window store of profile samples fed through a channel.
#[derive(Debug)]
pub struct Profiler {
    tx: Sender<ProfileSample>,
    rx: Receiver<ProfileSample>,
    window_ms: f64,
    bins: usize,
    samples: VecDeque<ProfileSample>,
}

impl Profiler {
    pub fn new(window_ms: f64, bins: usize) -> Self {
        let (tx, rx) = channel();
        Self {
            tx,
            rx,
            window_ms,
            bins,
            samples: VecDeque::new(),
        }
    }

    pub fn sender(&self) -> Sender<ProfileSample> {
        self.tx.clone()
    }

    /// Moves queued samples into the window and forgets those older than
    /// `now - window`.
    pub fn apply(&mut self, now: f64) {
        self.samples.extend(self.rx.try_iter());
        let horizon = now - self.window_ms;
        self.samples.retain(|s| s.at >= horizon);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-application histograms and their sample counts.
    pub fn histograms(
        &self,
    ) -> Result<(BTreeMap<String, EmpiricalHistogram>, BTreeMap<String, f64>)> {
        let mut by_app: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in &self.samples {
            by_app.entry(s.app.clone()).or_default().push(s.exec_ms);
        }
        let mut hists = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for (app, xs) in by_app {
            weights.insert(app.clone(), xs.len() as f64);
            hists.insert(app, EmpiricalHistogram::from_samples(&xs, self.bins)?);
        }
        Ok((hists, weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> EmpiricalHistogram {
        EmpiricalHistogram::uniform(1.0, 100.0).unwrap()
    }

    #[test]
    fn static_point_mass_models() {
        let mut hists = BTreeMap::new();
        hists.insert(
            "a".to_string(),
            EmpiricalHistogram::point_mass(10.0).unwrap(),
        );
        let m = refresh_batch_models(
            &hists,
            &BTreeMap::new(),
            &[1, 2, 4],
            BatchCostCoefficients::new(0.0, 1.0).unwrap(),
            &prior(),
            64,
        )
        .unwrap();
        assert!(!m.cold_start);
        let e: Vec<f64> = m.by_size.values().map(|m| m.expectation).collect();
        assert_eq!(e, vec![10.0, 20.0, 40.0]);
    }

    #[test]
    fn cold_start_uses_prior() {
        let m = refresh_batch_models(
            &BTreeMap::new(),
            &BTreeMap::new(),
            &[1],
            BatchCostCoefficients::default(),
            &prior(),
            64,
        )
        .unwrap();
        assert!(m.cold_start);
        assert!((m.by_size[&1].expectation - 50.5).abs() < 1e-9);
    }

    #[test]
    fn window_forgets_old_samples() {
        let mut p = Profiler::new(100.0, 8);
        let tx = p.sender();
        for t in 0..10 {
            tx.send(ProfileSample {
                app: "a".into(),
                exec_ms: 10.0,
                at: t as f64 * 20.0,
            })
            .unwrap();
        }
        assert!(p.is_empty());
        p.apply(180.0);
        assert_eq!(p.len(), 6);
        for t in 0..5 {
            tx.send(ProfileSample {
                app: "a".into(),
                exec_ms: 100.0,
                at: 300.0 + t as f64,
            })
            .unwrap();
        }
        p.apply(400.0);
        let (h, w) = p.histograms().unwrap();
        assert_eq!(w["a"], 5.0);
        assert_eq!(h["a"].min(), 100.0);
    }

    #[test]
    fn one_sample_gives_one_app() {
        let mut p = Profiler::new(1000.0, 64);
        p.sender()
            .send(ProfileSample {
                app: "x".into(),
                exec_ms: 3.0,
                at: 0.0,
            })
            .unwrap();
        p.apply(1.0);
        let (h, _) = p.histograms().unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h["x"].total(), 1.0);
    }
}
