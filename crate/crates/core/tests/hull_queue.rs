use std::collections::BTreeMap;

use orloj::hull::{bridge_fallbacks, new_queue, HullPoint, HullQueue, KineticQueue, RebuildQueue};
use orloj::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper hull with strict turns by gift wrapping over column tops.
fn oracle_hull(points: &[HullPoint]) -> Vec<(f64, f64)> {
    let mut tops: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for p in points {
        let e = tops.entry(p.x.to_bits() ^ (1 << 63)).or_insert((p.x, p.y));
        e.1 = e.1.max(p.y);
    }
    let mut cols: Vec<(f64, f64)> = tops.into_values().collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    if cols.is_empty() {
        return vec![];
    }
    // a column top is a hull vertex iff no pair of other tops on either
    // side lies on or above it
    let mut out = vec![];
    for (i, &(x, y)) in cols.iter().enumerate() {
        let mut keep = true;
        'outer: for &(lx, ly) in &cols[..i] {
            for &(rx, ry) in &cols[i + 1..] {
                let at = ly + (ry - ly) * (x - lx) / (rx - lx);
                if at >= y {
                    keep = false;
                    break 'outer;
                }
            }
        }
        if keep {
            out.push((x, y));
        }
    }
    out
}

fn oracle_max(points: &[HullPoint], s: f64) -> HullPoint {
    let mut best = points[0];
    for p in &points[1..] {
        let (vp, vb) = (s * p.x + p.y, s * best.x + best.y);
        if vp > vb || (vp == vb && p.key < best.key) {
            best = *p;
        }
    }
    best
}

fn run_ops(q: &mut dyn KineticQueue, rng: &mut ChaCha8Rng, ops: usize, grid: bool) {
    let mut live: Vec<HullPoint> = vec![];
    let mut next_key = 0u64;
    for step in 0..ops {
        if live.is_empty() || rng.random_bool(0.6) {
            let (x, y) = if grid {
                (
                    rng.random_range(0..20) as f64,
                    rng.random_range(0..20) as f64,
                )
            } else {
                (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3))
            };
            let p = HullPoint::new(x, y, next_key);
            next_key += 1;
            q.insert(p).unwrap();
            live.push(p);
        } else {
            let i = rng.random_range(0..live.len());
            let p = live.swap_remove(i);
            assert_eq!(q.remove(p.key).unwrap(), p);
        }
        if step % 97 == 0 {
            q.validate().unwrap();
            let got: Vec<(f64, f64)> = q.hull_vertices().iter().map(|p| (p.x, p.y)).collect();
            assert_eq!(got, oracle_hull(&live), "hull mismatch at step {step}");
        }
        if !live.is_empty() && step % 13 == 0 {
            let s = if grid {
                [0.5, 1.0, 2.0, 1.0 / 3.0][step % 4]
            } else {
                rng.random_range(1e-3..1e3)
            };
            assert_eq!(
                q.query_max(s).unwrap(),
                oracle_max(&live, s),
                "query at step {step}"
            );
        }
    }
}

#[test]
fn hull_matches_oracle_on_random_points() {
    let before = bridge_fallbacks();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    run_ops(&mut HullQueue::new(), &mut rng, 3000, false);
    assert_eq!(
        bridge_fallbacks(),
        before,
        "descent needed the linear fallback"
    );
}

#[test]
fn hull_matches_oracle_on_grid_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    run_ops(&mut HullQueue::new(), &mut rng, 3000, true);
}

#[test]
fn rebuild_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    run_ops(&mut RebuildQueue::new(), &mut rng, 1500, false);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    run_ops(&mut RebuildQueue::new(), &mut rng, 1500, true);
}

#[test]
fn collinear_insert_keeps_endpoints() {
    for name in ["hull", "rebuild"] {
        let mut q = new_queue(name).unwrap();
        for (k, (x, y)) in [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)].into_iter().enumerate() {
            q.insert(HullPoint::new(x, y, k as u64)).unwrap();
        }
        let v: Vec<(f64, f64)> = q.hull_vertices().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(v, vec![(0.0, 0.0), (2.0, 2.0)], "{name}");
    }
}

#[test]
fn removing_hull_vertex_and_interior_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<HullPoint> = (0..100)
        .map(|k| HullPoint::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), k))
        .collect();
    let mut q = HullQueue::new();
    for p in &pts {
        q.insert(*p).unwrap();
    }
    let hull = q.hull_vertices();
    let interior = pts
        .iter()
        .find(|p| !hull.iter().any(|h| h.key == p.key))
        .unwrap();
    q.remove(interior.key).unwrap();
    assert_eq!(q.hull_vertices(), hull);

    let vertex = hull[hull.len() / 2];
    q.remove(vertex.key).unwrap();
    let rest: Vec<HullPoint> = pts
        .iter()
        .copied()
        .filter(|p| p.key != vertex.key && p.key != interior.key)
        .collect();
    let got: Vec<(f64, f64)> = q.hull_vertices().iter().map(|p| (p.x, p.y)).collect();
    assert_eq!(got, oracle_hull(&rest));
}

#[test]
fn pop_top_k_orders_by_priority_then_key() {
    for name in ["hull", "rebuild"] {
        let mut q = new_queue(name).unwrap();
        q.insert(HullPoint::new(1.0, 0.0, 0)).unwrap();
        q.insert(HullPoint::new(0.0, 5.0, 1)).unwrap();
        q.insert(HullPoint::new(2.0, 1.0, 2)).unwrap();
        let top: Vec<u64> = q.pop_top_k(2, 1.0).unwrap().iter().map(|p| p.key).collect();
        assert_eq!(top, vec![1, 2], "{name}");

        let mut q = new_queue(name).unwrap();
        for k in [5, 2, 8] {
            q.insert(HullPoint::new(1.0, 1.0, k)).unwrap();
        }
        q.insert(HullPoint::new(0.0, 2.0, 1)).unwrap();
        let all: Vec<u64> = q.pop_top_k(4, 1.0).unwrap().iter().map(|p| p.key).collect();
        assert_eq!(all, vec![1, 2, 5, 8], "{name}");
        assert!(matches!(q.pop_top_k(1, 1.0), Err(Error::Underflow { .. })));
    }
}

#[test]
fn identical_sequences_give_identical_answers() {
    let run = || {
        let mut q = HullQueue::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..500 {
            q.insert(HullPoint::new(
                rng.random_range(0..8) as f64,
                rng.random_range(0..8) as f64,
                k,
            ))
            .unwrap();
        }
        q.pop_top_k(500, 1.0).unwrap()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queue_agrees_with_linear_scan(
        pts in prop::collection::vec((-50i32..50, -50i32..50), 1..120),
        removals in prop::collection::vec(any::<prop::sample::Index>(), 0..60),
        slopes in prop::collection::vec(0.01f64..100.0, 1..8),
    ) {
        let mut q = HullQueue::new();
        let mut live: Vec<HullPoint> = pts
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| HullPoint::new(x as f64 / 7.0, y as f64 / 3.0, k as u64))
            .collect();
        for p in &live {
            q.insert(*p).unwrap();
        }
        for idx in removals {
            if live.len() <= 1 {
                break;
            }
            let p = live.swap_remove(idx.index(live.len()));
            q.remove(p.key).unwrap();
        }
        prop_assert!(q.validate().is_ok());
        let got: Vec<(f64, f64)> = q.hull_vertices().iter().map(|p| (p.x, p.y)).collect();
        prop_assert_eq!(got, oracle_hull(&live));
        for s in slopes {
            prop_assert_eq!(q.query_max(s).unwrap(), oracle_max(&live, s));
        }
    }
}
