//! SLO cost functions and the time-varying priority score derived from them.
//!
//! A request with deadline `D` and miss penalty `c` scores
//! `p(t) = (E[C(t + tau + L)] - E[C(t + L)]) / E[L]` where `L` is the batch
//! latency and `tau ~ Exp(b)` is the delay it would suffer if not picked now.
//! Over a histogram of `L` the score is a sum of per-bin closed forms, and
//! between two milestones it is exactly `alpha * e^(b t) + beta`.
//!
//! All times handed to this module are relative to [`ScoreParams::base_time`].

use serde::{Deserialize, Serialize};

use crate::dist::BatchLatencyModel;
use crate::error::{Error, Result};

pub const DEFAULT_B: f64 = 1e-4;

/// Relative time after which the base is moved forward. The effective
/// horizon is further capped at `REBASE_EXPONENT / b`.
pub const REBASE_HORIZON_MS: f64 = 600_000.0;

/// Largest `b * t` allowed before rebasing. `e^200` is far from overflow and
/// leaves room for the deadline offsets inside the exponent.
pub const REBASE_EXPONENT: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCostFunction {
    pub deadline: f64,
    pub penalty: f64,
}

impl StepCostFunction {
    pub fn new(deadline: f64, penalty: f64) -> Result<Self> {
        if !deadline.is_finite() {
            return Err(Error::invalid("deadline must be finite"));
        }
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::invalid(format!(
                "penalty must be > 0 (got {penalty})"
            )));
        }
        Ok(Self { deadline, penalty })
    }

    /// Cost of finishing at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.deadline {
            self.penalty
        } else {
            0.0
        }
    }
}

/// Cumulative step function: finishing after `d_i` costs `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseStepCostFunction {
    steps: Vec<(f64, f64)>,
}

impl PiecewiseStepCostFunction {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("a multistep cost needs at least one step"));
        }
        if steps.iter().any(|(d, c)| !d.is_finite() || !c.is_finite()) {
            return Err(Error::invalid("multistep cost values must be finite"));
        }
        if steps[0].1 <= 0.0 {
            return Err(Error::invalid("first step cost must be > 0"));
        }
        if steps
            .windows(2)
            .any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1)
        {
            return Err(Error::invalid(
                "multistep deadlines and costs must be strictly increasing",
            ));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.steps
            .iter()
            .rev()
            .find(|(d, _)| x > *d)
            .map_or(0.0, |(_, c)| *c)
    }
}

/// Splits a cumulative step function into single steps carrying the cost
/// increments.
pub fn decompose_multistep(cost: &PiecewiseStepCostFunction) -> Vec<StepCostFunction> {
    let mut prev = 0.0;
    cost.steps
        .iter()
        .map(|&(d, c)| {
            let step = StepCostFunction {
                deadline: d,
                penalty: c - prev,
            };
            prev = c;
            step
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub b: f64,
    pub base_time: f64,
}

impl ScoreParams {
    pub fn new(b: f64, base_time: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("b must be > 0 (got {b})")));
        }
        if !base_time.is_finite() {
            return Err(Error::invalid("base time must be finite"));
        }
        Ok(Self { b, base_time })
    }

    pub fn rel(&self, abs: f64) -> f64 {
        abs - self.base_time
    }

    /// Relative time past which [`needs_rebase`](Self::needs_rebase) fires.
    pub fn horizon(&self) -> f64 {
        REBASE_HORIZON_MS.min(REBASE_EXPONENT / self.b)
    }

    pub fn needs_rebase(&self, now_abs: f64) -> bool {
        self.rel(now_abs) > self.horizon()
    }

    /// Same `b`, new reference point.
    pub fn rebase(&self, new_base: f64) -> Result<Self> {
        if !(new_base >= self.base_time) {
            return Err(Error::invalid(format!(
                "rebase must move forward ({} -> {new_base})",
                self.base_time
            )));
        }
        Ok(Self {
            b: self.b,
            base_time: new_base,
        })
    }

    /// `e^(b t)` for relative `t`, the slope argument of hull queries.
    pub fn growth(&self, t: f64) -> Result<f64> {
        let g = (self.b * t).exp();
        if g.is_finite() && g > 0.0 {
            Ok(g)
        } else {
            Err(Error::Overflow(format!("e^(b t) with b={} t={t}", self.b)))
        }
    }
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            b: DEFAULT_B,
            base_time: 0.0,
        }
    }
}

/// One affine segment `alpha * e^(b t) + beta` of a score, valid on
/// `[valid_from, valid_until)` in relative time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityPiece {
    pub alpha: f64,
    pub beta: f64,
    pub valid_from: f64,
    pub valid_until: f64,
    pub request_id: u64,
}

impl PriorityPiece {
    pub fn eval(&self, t: f64, params: &ScoreParams) -> Result<f64> {
        let v = self.alpha * params.growth(t)? + self.beta;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!("piece value at t={t}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bin {
    l1: f64,
    l2: f64,
    mass: f64,
}

/// Per-bin data of a batch latency histogram, prepared once per batch model
/// and reused for every request scored against it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreKernel {
    bins: Vec<Bin>,
    expectation: f64,
}

impl ScoreKernel {
    pub fn new(model: &BatchLatencyModel) -> Result<Self> {
        let h = &model.pdf_hist;
        if h.is_empty() {
            return Err(Error::ColdStart);
        }
        if !(model.expectation > 0.0 && model.expectation.is_finite()) {
            return Err(Error::invalid(format!(
                "batch latency expectation must be > 0 (got {})",
                model.expectation
            )));
        }
        let e = h.edges();
        let bins = (0..h.bins())
            .map(|i| Bin {
                l1: e[i],
                l2: e[i + 1],
                mass: h.mass(i),
            })
            .filter(|b| b.mass > 0.0)
            .collect();
        Ok(Self {
            bins,
            expectation: model.expectation,
        })
    }

    pub fn expectation(&self) -> f64 {
        self.expectation
    }

    /// `p(t)` in slack form, summed over bins.
    pub fn score(&self, cost: &StepCostFunction, t: f64, params: &ScoreParams) -> Result<f64> {
        let b = params.b;
        let s = cost.deadline - t;
        let scale = cost.penalty / self.expectation;
        let mut acc = 0.0;
        for bin in &self.bins {
            let w = bin.l2 - bin.l1;
            let term = if s > bin.l2 {
                let decay = (-b * (s - bin.l2)).exp();
                if w > 0.0 {
                    decay * (-(-b * w).exp_m1()) / (b * w)
                } else {
                    decay
                }
            } else if s > bin.l1 {
                -(-b * (s - bin.l1)).exp_m1() / (b * w)
            } else {
                0.0
            };
            acc += bin.mass * term;
        }
        let v = scale * acc;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!("score at t={t}")))
        }
    }

    /// The piece active at relative time `t`, ending at the next milestone.
    pub fn piece_at(
        &self,
        cost: &StepCostFunction,
        t: f64,
        params: &ScoreParams,
        request_id: u64,
    ) -> Result<PriorityPiece> {
        let b = params.b;
        let d = cost.deadline;
        let scale = cost.penalty / self.expectation;
        let (mut alpha, mut beta) = (0.0, 0.0);
        let mut from = f64::NEG_INFINITY;
        let mut until = f64::INFINITY;
        for bin in &self.bins {
            let w = bin.l2 - bin.l1;
            let (m2, m1) = (d - bin.l2, d - bin.l1);
            if t < m2 {
                let g = (b * (bin.l2 - d)).exp();
                alpha += if w > 0.0 {
                    bin.mass * g * (-(-b * w).exp_m1()) / (b * w)
                } else {
                    bin.mass * g
                };
                until = until.min(m2);
            } else if t < m1 {
                let k = bin.mass / (b * w);
                alpha -= k * (b * (bin.l1 - d)).exp();
                beta += k;
                from = from.max(m2);
                until = until.min(m1);
            } else {
                from = from.max(m1);
            }
        }
        let piece = PriorityPiece {
            alpha: scale * alpha,
            beta: scale * beta,
            valid_from: from,
            valid_until: until,
            request_id,
        };
        if !(piece.alpha.is_finite() && piece.beta.is_finite()) {
            return Err(Error::Overflow(format!("piece coefficients at t={t}")));
        }
        Ok(piece)
    }

    /// Sorted distinct milestones `{D - l2, D - l1}` over all bins.
    pub fn milestones(&self, cost: &StepCostFunction) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .bins
            .iter()
            .flat_map(|bin| [cost.deadline - bin.l2, cost.deadline - bin.l1])
            .collect();
        m.sort_by(f64::total_cmp);
        m.dedup();
        m
    }

    /// Relative time from which the score is identically zero.
    pub fn zero_after(&self, cost: &StepCostFunction) -> f64 {
        cost.deadline - self.bins.iter().map(|b| b.l1).fold(f64::INFINITY, f64::min)
    }
}

/// Priority score of a request at relative time `t`.
pub fn priority_score(
    batch_model: &BatchLatencyModel,
    cost: &StepCostFunction,
    t: f64,
    params: &ScoreParams,
) -> Result<f64> {
    ScoreKernel::new(batch_model)?.score(cost, t, params)
}

/// Score of a multistep cost: the sum of its single-step parts.
pub fn priority_score_multistep(
    batch_model: &BatchLatencyModel,
    cost: &PiecewiseStepCostFunction,
    t: f64,
    params: &ScoreParams,
) -> Result<f64> {
    let kernel = ScoreKernel::new(batch_model)?;
    decompose_multistep(cost)
        .iter()
        .map(|step| kernel.score(step, t, params))
        .sum()
}

/// Full decomposition of the score into affine pieces, one per interval
/// between consecutive milestones.
pub fn affine_pieces(
    batch_model: &BatchLatencyModel,
    cost: &StepCostFunction,
    params: &ScoreParams,
    request_id: u64,
) -> Result<Vec<PriorityPiece>> {
    let kernel = ScoreKernel::new(batch_model)?;
    let ms = kernel.milestones(cost);
    let mut starts = Vec::with_capacity(ms.len() + 1);
    starts.push(f64::NEG_INFINITY);
    starts.extend(ms.iter().copied());
    starts
        .iter()
        .map(|&from| {
            let probe = if from.is_finite() { from } else { ms[0] - 1.0 };
            let mut p = kernel.piece_at(cost, probe, params, request_id)?;
            p.valid_from = from;
            Ok(p)
        })
        .collect()
}

/// Smallest piece boundary strictly greater than `t`, or infinity.
pub fn milestone(pieces: &[PriorityPiece], t: f64) -> f64 {
    pieces
        .iter()
        .map(|p| p.valid_until)
        .find(|&u| u > t)
        .unwrap_or(f64::INFINITY)
}
