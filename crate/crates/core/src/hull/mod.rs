//! Max-priority queues over affine priorities `x * s + y`, queried at a
//! positive slope argument `s`.
//!
//! Each request contributes the point `(alpha, beta)` of its current score
//! piece; the request with the highest score at time `t` is the extreme point
//! of the upper convex hull in direction `(e^(b t), 1)`.

mod chain;
mod ovl;
mod rebuild;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ovl::{bridge_fallbacks, HullQueue};
pub use rebuild::RebuildQueue;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    pub x: f64,
    pub y: f64,
    pub key: u64,
}

impl HullPoint {
    pub fn new(x: f64, y: f64, key: u64) -> Self {
        Self { x, y, key }
    }

    pub fn value(&self, slope: f64) -> f64 {
        slope * self.x + self.y
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.x.is_finite() && self.y.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "hull point {} has non-finite coordinates ({}, {})",
                self.key, self.x, self.y
            )))
        }
    }
}

/// Ordering used by every queue: higher value first, then smaller key.
pub fn better(a: &HullPoint, b: &HullPoint, slope: f64) -> bool {
    let (va, vb) = (a.value(slope), b.value(slope));
    va > vb || (va == vb && a.key < b.key)
}

pub(crate) fn check_slope(slope: f64) -> Result<()> {
    if slope > 0.0 && slope.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "slope argument must be finite and > 0 (got {slope})"
        )))
    }
}

/// A max-priority queue keyed by request id whose priorities are linear in a
/// shared slope argument.
pub trait KineticQueue: Send + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Adds a point. Duplicate keys are rejected.
    fn insert(&mut self, p: HullPoint) -> Result<()>;

    /// Removes the point stored under `key` and returns it.
    fn remove(&mut self, key: u64) -> Result<HullPoint>;

    /// Point maximizing `x * slope + y`, ties to the smallest key.
    fn query_max(&self, slope: f64) -> Result<HullPoint>;

    fn get(&self, key: u64) -> Option<HullPoint>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn contains(&self, key: u64) -> bool {
        self.get(key).is_some()
    }

    /// Vertices of the upper hull from left to right, strict turns only.
    fn hull_vertices(&self) -> Vec<HullPoint>;

    /// Removes and returns the `k` best points at `slope`, best first.
    fn pop_top_k(&mut self, k: usize, slope: f64) -> Result<Vec<HullPoint>> {
        check_slope(slope)?;
        if k > self.len() {
            return Err(Error::Underflow {
                requested: k,
                available: self.len(),
            });
        }
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let top = self.query_max(slope)?;
            self.remove(top.key)?;
            out.push(top);
        }
        Ok(out)
    }

    /// Structural self-check; `Err` describes the first broken invariant.
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

type QueueFactory = fn() -> Box<dyn KineticQueue>;

fn registry() -> BTreeMap<&'static str, QueueFactory> {
    let mut reg: BTreeMap<&'static str, QueueFactory> = BTreeMap::new();
    reg.insert("hull", || Box::new(HullQueue::new()));
    reg.insert("rebuild", || Box::new(RebuildQueue::new()));
    reg
}

/// Names accepted by [`new_queue`].
pub fn queue_names() -> Vec<&'static str> {
    registry().into_keys().collect()
}

pub fn new_queue(name: &str) -> Result<Box<dyn KineticQueue>> {
    registry()
        .get(name)
        .map(|f| f())
        .ok_or_else(|| Error::invalid(format!("unknown queue backend `{name}`")))
}
