use std::collections::HashMap;

use super::{better, check_slope, HullPoint, KineticQueue};
use crate::error::{Error, Result};

/// Reference queue: a sorted point array whose hull is rebuilt from scratch
/// after every update. Linear time per operation.
#[derive(Debug, Default, Clone)]
pub struct RebuildQueue {
    /// Sorted by x, then y descending, then key.
    points: Vec<HullPoint>,
    index: HashMap<u64, HullPoint>,
    hull: Vec<HullPoint>,
}

fn order(a: &HullPoint, b: &HullPoint) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(b.y.total_cmp(&a.y))
        .then(a.key.cmp(&b.key))
}

/// Upper hull of `points` (sorted by [`order`]) with strict turns.
pub(crate) fn upper_hull(points: &[HullPoint]) -> Vec<HullPoint> {
    let mut hull: Vec<HullPoint> = Vec::new();
    for p in points {
        if hull.last().is_some_and(|l| l.x == p.x) {
            // column top already placed
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(*p);
    }
    hull
}

impl RebuildQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn rebuild(&mut self) {
        self.hull = upper_hull(&self.points);
    }
}

impl KineticQueue for RebuildQueue {
    fn name(&self) -> &'static str {
        "rebuild"
    }

    fn insert(&mut self, p: HullPoint) -> Result<()> {
        p.check()?;
        if self.index.contains_key(&p.key) {
            return Err(Error::invalid(format!("key {} already queued", p.key)));
        }
        let at = self.points.partition_point(|q| order(q, &p).is_lt());
        self.points.insert(at, p);
        self.index.insert(p.key, p);
        self.rebuild();
        Ok(())
    }

    fn remove(&mut self, key: u64) -> Result<HullPoint> {
        let p = self.index.remove(&key).ok_or(Error::NotFound(key))?;
        let at = self.points.partition_point(|q| order(q, &p).is_lt());
        self.points.remove(at);
        self.rebuild();
        Ok(p)
    }

    fn query_max(&self, slope: f64) -> Result<HullPoint> {
        check_slope(slope)?;
        let mut it = self.points.iter();
        let mut best = *it.next().ok_or(Error::Empty)?;
        for p in it {
            if better(p, &best, slope) {
                best = *p;
            }
        }
        Ok(best)
    }

    fn get(&self, key: u64) -> Option<HullPoint> {
        self.index.get(&key).copied()
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn hull_vertices(&self) -> Vec<HullPoint> {
        self.hull.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_middle_excluded() {
        let mut q = RebuildQueue::new();
        for (i, (x, y)) in [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)].into_iter().enumerate() {
            q.insert(HullPoint::new(x, y, i as u64)).unwrap();
        }
        let keys: Vec<u64> = q.hull_vertices().iter().map(|p| p.key).collect();
        assert_eq!(keys, vec![0, 2]);
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn remove_and_errors() {
        let mut q = RebuildQueue::new();
        q.insert(HullPoint::new(1.0, 1.0, 1)).unwrap();
        assert!(q.insert(HullPoint::new(2.0, 1.0, 1)).is_err());
        assert!(matches!(q.remove(9), Err(Error::NotFound(9))));
        q.remove(1).unwrap();
        assert!(q.is_empty());
        assert!(q.hull_vertices().is_empty());
        assert!(matches!(q.query_max(1.0), Err(Error::Empty)));
    }
}
