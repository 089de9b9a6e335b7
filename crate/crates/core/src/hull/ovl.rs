//! Dynamic upper hull in the style of Overmars and van Leeuwen.
//!
//! Points live in a height-balanced tree keyed by distinct `x`. Points that
//! share an `x` form a column; only its top point (largest `y`, then smallest
//! key) can be a hull vertex. Every tree node stores the full upper hull of
//! its subtree as a persistent chain, built from its children's chains by
//! finding the bridge between them and concatenating the surviving prefix
//! and suffix. Children keep their own chains because the chains are
//! persistent, so no hull fragments have to be handed back on the way down.
//!
//! An update touches `O(log n)` nodes and each merge costs `O(log n)`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ordered_float::OrderedFloat;

use super::chain::{self, cross, Chain, Vertex};
use super::rebuild::upper_hull;
use super::{better, check_slope, HullPoint, KineticQueue};
use crate::error::{Error, Result};

static BRIDGE_FALLBACKS: AtomicU64 = AtomicU64::new(0);

/// Number of bridge searches, process-wide, that fell back to a linear scan
/// because the logarithmic descent got stuck on degenerate input.
pub fn bridge_fallbacks() -> u64 {
    BRIDGE_FALLBACKS.load(Ordering::Relaxed)
}

type Column = BTreeSet<(Reverse<OrderedFloat<f64>>, u64)>;
type Link = Option<Box<ONode>>;

#[derive(Debug)]
struct ONode {
    x: f64,
    column: Column,
    left: Link,
    right: Link,
    height: u32,
    hull: Chain,
}

impl ONode {
    fn leaf(p: &HullPoint) -> Box<ONode> {
        let mut column = Column::new();
        column.insert((Reverse(OrderedFloat(p.y)), p.key));
        let mut n = Box::new(ONode {
            x: p.x,
            column,
            left: None,
            right: None,
            height: 1,
            hull: None,
        });
        pull(&mut n);
        n
    }

    fn rep(&self) -> Vertex {
        let (Reverse(y), key) = *self.column.first().expect("empty column");
        Vertex {
            x: self.x,
            y: y.0,
            key,
        }
    }
}

fn h(l: &Link) -> u32 {
    l.as_ref().map_or(0, |n| n.height)
}

fn hull_of(l: &Link) -> Chain {
    l.as_ref().and_then(|n| n.hull.clone())
}

fn pull(n: &mut ONode) {
    n.height = 1 + h(&n.left).max(h(&n.right));
    let mid = merge(hull_of(&n.left), chain::single(n.rep()));
    n.hull = merge(mid, hull_of(&n.right));
}

fn rot_left(mut n: Box<ONode>) -> Box<ONode> {
    let mut r = n.right.take().expect("rotation without right child");
    n.right = r.left.take();
    pull(&mut n);
    r.left = Some(n);
    pull(&mut r);
    r
}

fn rot_right(mut n: Box<ONode>) -> Box<ONode> {
    let mut l = n.left.take().expect("rotation without left child");
    n.left = l.right.take();
    pull(&mut n);
    l.right = Some(n);
    pull(&mut l);
    l
}

fn balance(mut n: Box<ONode>) -> Box<ONode> {
    let (hl, hr) = (h(&n.left), h(&n.right));
    if hl > hr + 1 {
        let l = n.left.take().unwrap();
        n.left = Some(if h(&l.left) < h(&l.right) {
            rot_left(l)
        } else {
            l
        });
        rot_right(n)
    } else if hr > hl + 1 {
        let r = n.right.take().unwrap();
        n.right = Some(if h(&r.right) < h(&r.left) {
            rot_right(r)
        } else {
            r
        });
        rot_left(n)
    } else {
        pull(&mut n);
        n
    }
}

fn insert(link: Link, p: &HullPoint) -> Box<ONode> {
    let Some(mut n) = link else {
        return ONode::leaf(p);
    };
    match p.x.total_cmp(&n.x) {
        std::cmp::Ordering::Less => n.left = Some(insert(n.left.take(), p)),
        std::cmp::Ordering::Greater => n.right = Some(insert(n.right.take(), p)),
        std::cmp::Ordering::Equal => {
            n.column.insert((Reverse(OrderedFloat(p.y)), p.key));
            pull(&mut n);
            return n;
        }
    }
    balance(n)
}

fn take_min(mut n: Box<ONode>) -> (Link, Box<ONode>) {
    match n.left.take() {
        None => (n.right.take(), n),
        Some(l) => {
            let (l2, m) = take_min(l);
            n.left = l2;
            (Some(balance(n)), m)
        }
    }
}

fn remove(link: Link, p: &HullPoint) -> Link {
    let mut n = link.expect("indexed point missing from tree");
    match p.x.total_cmp(&n.x) {
        std::cmp::Ordering::Less => n.left = remove(n.left.take(), p),
        std::cmp::Ordering::Greater => n.right = remove(n.right.take(), p),
        std::cmp::Ordering::Equal => {
            n.column.remove(&(Reverse(OrderedFloat(p.y)), p.key));
            if !n.column.is_empty() {
                pull(&mut n);
                return Some(n);
            }
            return match (n.left.take(), n.right.take()) {
                (None, None) => None,
                (Some(l), None) => Some(l),
                (None, Some(r)) => Some(r),
                (Some(l), Some(r)) => {
                    let (r2, mut m) = take_min(r);
                    m.left = Some(l);
                    m.right = r2;
                    Some(balance(m))
                }
            };
        }
    }
    Some(balance(n))
}

/// Upper hull of `a ++ b` where every x in `a` is below every x in `b`.
fn merge(a: Chain, b: Chain) -> Chain {
    let (an, bn) = match (&a, &b) {
        (None, _) => return b,
        (_, None) => return a,
        (Some(an), Some(bn)) => (an, bn),
    };
    let (p, q) = bridge(an, bn);
    let (left, _) = chain::split(&a, &|v: &Vertex| v.x <= p.x);
    let (_, right) = chain::split(&b, &|v: &Vertex| v.x < q.x);
    chain::join2(left, right)
}

struct Cursor<'a> {
    node: &'a Arc<chain::Node>,
    pred: Option<Vertex>,
    succ: Option<Vertex>,
}

impl<'a> Cursor<'a> {
    fn new(node: &'a Arc<chain::Node>) -> Self {
        Self {
            node,
            pred: None,
            succ: None,
        }
    }

    fn prev(&self) -> Option<Vertex> {
        self.node.left.as_ref().map(|l| l.hi).or(self.pred)
    }

    fn next(&self) -> Option<Vertex> {
        self.node.right.as_ref().map(|r| r.lo).or(self.succ)
    }

    fn go_left(&mut self) -> bool {
        let node: &'a Arc<chain::Node> = self.node;
        match node.left.as_ref() {
            Some(l) => {
                self.succ = Some(node.v);
                self.node = l;
                true
            }
            None => false,
        }
    }

    fn go_right(&mut self) -> bool {
        let node: &'a Arc<chain::Node> = self.node;
        match node.right.as_ref() {
            Some(r) => {
                self.pred = Some(node.v);
                self.node = r;
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Tangent,
    Right,
}

/// Upper common tangent of two hulls separated in x. Returns the leftmost
/// tangent point of `a` and the rightmost tangent point of `b`, so that
/// collinear points drop out of the merged hull.
fn bridge(a: &Arc<chain::Node>, b: &Arc<chain::Node>) -> (Vertex, Vertex) {
    let m = 0.5 * (a.hi.x + b.lo.x);
    let mut u = Cursor::new(a);
    let mut w = Cursor::new(b);
    let guard = (a.height + b.height) as usize + 2;
    for _ in 0..=guard {
        let (p, q) = (u.node.v, w.node.v);
        let ls = if u.prev().is_some_and(|s| cross(&p, &q, &s) >= 0.0) {
            Side::Left
        } else if u.next().is_some_and(|s| cross(&p, &q, &s) > 0.0) {
            Side::Right
        } else {
            Side::Tangent
        };
        let rs = if w.next().is_some_and(|s| cross(&p, &q, &s) >= 0.0) {
            Side::Right
        } else if w.prev().is_some_and(|s| cross(&p, &q, &s) > 0.0) {
            Side::Left
        } else {
            Side::Tangent
        };
        let moved = match (ls, rs) {
            (Side::Tangent, Side::Tangent) => return (p, q),
            (Side::Left, Side::Right) => u.go_left() && w.go_right(),
            (Side::Left, _) => u.go_left(),
            (_, Side::Right) => w.go_right(),
            (Side::Right, Side::Tangent) => u.go_right(),
            (Side::Tangent, Side::Left) => w.go_left(),
            (Side::Right, Side::Left) => {
                let pn = u.next().unwrap();
                let qp = w.prev().unwrap();
                if intersect_x(&p, &pn, &qp, &q) <= m {
                    u.go_right()
                } else {
                    w.go_left()
                }
            }
        };
        if !moved {
            break;
        }
    }
    BRIDGE_FALLBACKS.fetch_add(1, Ordering::Relaxed);
    log::debug!("bridge descent stuck, scanning linearly");
    bridge_scan(a, b)
}

/// x coordinate where line `(a1, a2)` meets line `(b1, b2)`.
fn intersect_x(a1: &Vertex, a2: &Vertex, b1: &Vertex, b2: &Vertex) -> f64 {
    let sa = (a2.y - a1.y) / (a2.x - a1.x);
    let sb = (b2.y - b1.y) / (b2.x - b1.x);
    // y = a1.y + sa (x - a1.x) = b1.y + sb (x - b1.x)
    (b1.y - a1.y + sa * a1.x - sb * b1.x) / (sa - sb)
}

fn bridge_scan(a: &Arc<chain::Node>, b: &Arc<chain::Node>) -> (Vertex, Vertex) {
    let mut vs = Vec::with_capacity(a.size + b.size);
    chain::to_vec(&Some(a.clone()), &mut vs);
    let split_x = a.hi.x;
    chain::to_vec(&Some(b.clone()), &mut vs);
    let pts: Vec<HullPoint> = vs.iter().map(|v| HullPoint::new(v.x, v.y, v.key)).collect();
    let hull = upper_hull(&pts);
    let i = hull
        .windows(2)
        .position(|w| w[0].x <= split_x && w[1].x > split_x)
        .expect("merged hull must cross the split");
    let to_v = |p: &HullPoint| Vertex {
        x: p.x,
        y: p.y,
        key: p.key,
    };
    (to_v(&hull[i]), to_v(&hull[i + 1]))
}

/// Kinetic max-priority queue backed by a dynamic upper convex hull.
#[derive(Debug, Default)]
pub struct HullQueue {
    root: Link,
    index: HashMap<u64, HullPoint>,
}

impl HullQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn root_hull(&self) -> Chain {
        hull_of(&self.root)
    }

    /// Best column top with x in `[lo, hi]`.
    fn scan_range(&self, lo: f64, hi: f64, slope: f64) -> Option<HullPoint> {
        fn go(l: &Link, lo: f64, hi: f64, slope: f64, best: &mut Option<HullPoint>) {
            let Some(n) = l else { return };
            if n.x > lo {
                go(&n.left, lo, hi, slope, best);
            }
            if n.x >= lo && n.x <= hi {
                let r = n.rep();
                let p = HullPoint::new(r.x, r.y, r.key);
                if best.as_ref().is_none_or(|b| better(&p, b, slope)) {
                    *best = Some(p);
                }
            }
            if n.x < hi {
                go(&n.right, lo, hi, slope, best);
            }
        }
        let mut best = None;
        go(&self.root, lo, hi, slope, &mut best);
        best
    }
}

impl KineticQueue for HullQueue {
    fn name(&self) -> &'static str {
        "hull"
    }

    fn insert(&mut self, p: HullPoint) -> Result<()> {
        p.check()?;
        if self.index.contains_key(&p.key) {
            return Err(Error::invalid(format!("key {} already queued", p.key)));
        }
        self.root = Some(insert(self.root.take(), &p));
        self.index.insert(p.key, p);
        Ok(())
    }

    fn remove(&mut self, key: u64) -> Result<HullPoint> {
        let p = self.index.remove(&key).ok_or(Error::NotFound(key))?;
        self.root = remove(self.root.take(), &p);
        Ok(p)
    }

    fn query_max(&self, slope: f64) -> Result<HullPoint> {
        check_slope(slope)?;
        let root = self.root_hull().ok_or(Error::Empty)?;
        let mut cur = Cursor::new(&root);
        let mut best = None;
        loop {
            let here = cur.node.v;
            let up = cur
                .next()
                .is_some_and(|n| n.value(slope) > here.value(slope));
            if up {
                if !cur.go_right() {
                    break;
                }
            } else {
                best = Some((here, cur.next()));
                if !cur.go_left() {
                    break;
                }
            }
        }
        let (v, next) = best.unwrap_or((cur.node.v, cur.next()));
        let top = v.value(slope);
        let hi = match next {
            Some(n) if n.value(slope) >= top => n.x,
            _ => v.x,
        };
        self.scan_range(v.x, hi, slope).ok_or(Error::Empty)
    }

    fn get(&self, key: u64) -> Option<HullPoint> {
        self.index.get(&key).copied()
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn hull_vertices(&self) -> Vec<HullPoint> {
        let mut vs = Vec::new();
        chain::to_vec(&self.root_hull(), &mut vs);
        vs.into_iter()
            .map(|v| HullPoint::new(v.x, v.y, v.key))
            .collect()
    }

    fn validate(&self) -> Result<(), String> {
        fn go(l: &Link, lo: f64, hi: f64, count: &mut usize) -> Result<u32, String> {
            let Some(n) = l else { return Ok(0) };
            if !(n.x > lo && n.x < hi) {
                return Err(format!("outer order broken at x={}", n.x));
            }
            if n.column.is_empty() {
                return Err(format!("empty column at x={}", n.x));
            }
            *count += n.column.len();
            let hl = go(&n.left, lo, n.x, count)?;
            let hr = go(&n.right, n.x, hi, count)?;
            if hl.abs_diff(hr) > 1 || n.height != 1 + hl.max(hr) {
                return Err(format!("outer tree unbalanced at x={}", n.x));
            }
            chain::validate(&n.hull)?;
            Ok(n.height)
        }
        let mut count = 0;
        go(&self.root, f64::NEG_INFINITY, f64::INFINITY, &mut count)?;
        if count != self.index.len() {
            return Err(format!(
                "tree holds {count} points, index holds {}",
                self.index.len()
            ));
        }
        Ok(())
    }
}
