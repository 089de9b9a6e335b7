use std::collections::BTreeSet;

use ordered_float::OrderedFloat;

use super::RequestId;

/// Ordered set of `(deadline, id)` with insert, arbitrary delete and
/// find-min in logarithmic time.
#[derive(Debug, Clone, Default)]
pub struct DeadlineTracker {
    set: BTreeSet<(OrderedFloat<f64>, RequestId)>,
}

impl DeadlineTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the entry was already present.
    pub fn insert(&mut self, deadline: f64, id: RequestId) -> bool {
        self.set.insert((OrderedFloat(deadline), id))
    }

    pub fn remove(&mut self, deadline: f64, id: RequestId) -> bool {
        self.set.remove(&(OrderedFloat(deadline), id))
    }

    pub fn min(&self) -> Option<(f64, RequestId)> {
        self.set.first().map(|(d, id)| (d.0, *id))
    }

    pub fn contains(&self, deadline: f64, id: RequestId) -> bool {
        self.set.contains(&(OrderedFloat(deadline), id))
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, RequestId)> + '_ {
        self.set.iter().map(|(d, id)| (d.0, *id))
    }
}
