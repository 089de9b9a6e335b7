//! Persistent height-balanced trees used as concatenable queues of hull
//! vertices. Every operation returns a new root and shares untouched
//! subtrees with its inputs, so a parent can keep its children's hulls
//! intact while building its own.

use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Vertex {
    pub x: f64,
    pub y: f64,
    pub key: u64,
}

impl Vertex {
    pub fn value(&self, slope: f64) -> f64 {
        slope * self.x + self.y
    }
}

pub(crate) type Chain = Option<Arc<Node>>;

#[derive(Debug)]
pub(crate) struct Node {
    pub v: Vertex,
    pub left: Chain,
    pub right: Chain,
    pub height: u32,
    pub size: usize,
    pub lo: Vertex,
    pub hi: Vertex,
}

pub(crate) fn height(c: &Chain) -> u32 {
    c.as_ref().map_or(0, |n| n.height)
}

pub(crate) fn size(c: &Chain) -> usize {
    c.as_ref().map_or(0, |n| n.size)
}

fn mk(left: Chain, v: Vertex, right: Chain) -> Chain {
    let height = 1 + height(&left).max(height(&right));
    let size = 1 + size(&left) + size(&right);
    let lo = left.as_ref().map_or(v, |n| n.lo);
    let hi = right.as_ref().map_or(v, |n| n.hi);
    Some(Arc::new(Node {
        v,
        left,
        right,
        height,
        size,
        lo,
        hi,
    }))
}

pub(crate) fn single(v: Vertex) -> Chain {
    mk(None, v, None)
}

fn parts(n: &Arc<Node>) -> (Chain, Vertex, Chain) {
    (n.left.clone(), n.v, n.right.clone())
}

fn rotate_left(t: Chain) -> Chain {
    let n = t.expect("rotate_left on empty chain");
    let (a, x, r) = parts(&n);
    let r = r.expect("rotate_left without right child");
    let (b, y, c) = parts(&r);
    mk(mk(a, x, b), y, c)
}

fn rotate_right(t: Chain) -> Chain {
    let n = t.expect("rotate_right on empty chain");
    let (l, y, c) = parts(&n);
    let l = l.expect("rotate_right without left child");
    let (a, x, b) = parts(&l);
    mk(a, x, mk(b, y, c))
}

fn join_right(tl: Chain, k: Vertex, tr: Chain) -> Chain {
    let n = tl.as_ref().expect("join_right on empty chain");
    let (l, c, r) = parts(n);
    if height(&r) <= height(&tr) + 1 {
        let t = mk(r, k, tr);
        if height(&t) <= height(&l) + 1 {
            mk(l, c, t)
        } else {
            rotate_left(mk(l, c, rotate_right(t)))
        }
    } else {
        let t = join_right(r, k, tr);
        let th = height(&t);
        let out = mk(l.clone(), c, t);
        if th <= height(&l) + 1 {
            out
        } else {
            rotate_left(out)
        }
    }
}

fn join_left(tl: Chain, k: Vertex, tr: Chain) -> Chain {
    let n = tr.as_ref().expect("join_left on empty chain");
    let (l, c, r) = parts(n);
    if height(&l) <= height(&tl) + 1 {
        let t = mk(tl, k, l);
        if height(&t) <= height(&r) + 1 {
            mk(t, c, r)
        } else {
            rotate_right(mk(rotate_left(t), c, r))
        }
    } else {
        let t = join_left(tl, k, l);
        let th = height(&t);
        let out = mk(t, c, r.clone());
        if th <= height(&r) + 1 {
            out
        } else {
            rotate_right(out)
        }
    }
}

/// Concatenation `l ++ [k] ++ r`.
pub(crate) fn join(l: Chain, k: Vertex, r: Chain) -> Chain {
    let (hl, hr) = (height(&l), height(&r));
    if hl > hr + 1 {
        join_right(l, k, r)
    } else if hr > hl + 1 {
        join_left(l, k, r)
    } else {
        mk(l, k, r)
    }
}

/// Removes and returns the last vertex.
pub(crate) fn split_last(t: &Arc<Node>) -> (Chain, Vertex) {
    match &t.right {
        None => (t.left.clone(), t.v),
        Some(r) => {
            let (r2, last) = split_last(r);
            (join(t.left.clone(), t.v, r2), last)
        }
    }
}

/// Concatenation `l ++ r`.
pub(crate) fn join2(l: Chain, r: Chain) -> Chain {
    match &l {
        None => r,
        Some(n) => {
            let (l2, k) = split_last(n);
            join(l2, k, r)
        }
    }
}

/// Splits into the longest prefix whose vertices satisfy `pred` and the
/// rest. `pred` must be monotone (true, then false) along the chain.
pub(crate) fn split(t: &Chain, pred: &impl Fn(&Vertex) -> bool) -> (Chain, Chain) {
    match t {
        None => (None, None),
        Some(n) => {
            if pred(&n.v) {
                let (rl, rr) = split(&n.right, pred);
                (join(n.left.clone(), n.v, rl), rr)
            } else {
                let (ll, lr) = split(&n.left, pred);
                (ll, join(lr, n.v, n.right.clone()))
            }
        }
    }
}

pub(crate) fn to_vec(t: &Chain, out: &mut Vec<Vertex>) {
    if let Some(n) = t {
        to_vec(&n.left, out);
        out.push(n.v);
        to_vec(&n.right, out);
    }
}

/// `(b - a) x (c - a)`: positive when `c` lies above the line through `a`
/// and `b` (for `a.x < b.x`).
pub(crate) fn cross(a: &Vertex, b: &Vertex, c: &Vertex) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Checks balance, cached metadata and strictly increasing x.
pub(crate) fn validate(t: &Chain) -> Result<(), String> {
    fn go(t: &Chain) -> Result<(u32, usize), String> {
        let Some(n) = t else { return Ok((0, 0)) };
        let (hl, sl) = go(&n.left)?;
        let (hr, sr) = go(&n.right)?;
        if hl.abs_diff(hr) > 1 {
            return Err(format!("chain unbalanced at x={}", n.v.x));
        }
        if n.height != 1 + hl.max(hr) || n.size != 1 + sl + sr {
            return Err(format!("stale chain metadata at x={}", n.v.x));
        }
        if let Some(l) = &n.left {
            if !(l.hi.x < n.v.x) || n.lo != l.lo {
                return Err(format!("chain order broken at x={}", n.v.x));
            }
        }
        if let Some(r) = &n.right {
            if !(r.lo.x > n.v.x) || n.hi != r.hi {
                return Err(format!("chain order broken at x={}", n.v.x));
            }
        }
        Ok((n.height, n.size))
    }
    go(t).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> Vertex {
        Vertex {
            x,
            y: 0.0,
            key: x as u64,
        }
    }

    fn build(xs: impl Iterator<Item = f64>) -> Chain {
        xs.fold(None, |acc, x| join(acc, v(x), None))
    }

    fn xs(t: &Chain) -> Vec<f64> {
        let mut out = Vec::new();
        to_vec(t, &mut out);
        out.iter().map(|v| v.x).collect()
    }

    #[test]
    fn append_stays_balanced() {
        let t = build((0..1000).map(f64::from));
        validate(&t).unwrap();
        assert_eq!(size(&t), 1000);
        assert!(height(&t) <= 15);
    }

    #[test]
    fn split_and_join_round_trip() {
        let t = build((0..200).map(f64::from));
        for cut in [0.0, 1.0, 57.0, 199.0, 500.0] {
            let (a, b) = split(&t, &|v: &Vertex| v.x < cut);
            validate(&a).unwrap();
            validate(&b).unwrap();
            assert!(xs(&a).iter().all(|&x| x < cut));
            assert!(xs(&b).iter().all(|&x| x >= cut));
            let j = join2(a, b);
            validate(&j).unwrap();
            assert_eq!(xs(&j), xs(&t));
        }
    }

    #[test]
    fn join_uneven_heights() {
        let big = build((0..500).map(f64::from));
        let small = build((600..603).map(f64::from));
        let j = join(big.clone(), v(550.0), small.clone());
        validate(&j).unwrap();
        assert_eq!(size(&j), 504);
        let j = join(
            build((0..3).map(f64::from)),
            v(5.0),
            build((10..700).map(f64::from)),
        );
        validate(&j).unwrap();
        assert_eq!(j.as_ref().unwrap().lo.x, 0.0);
        assert_eq!(j.as_ref().unwrap().hi.x, 699.0);
    }

    #[test]
    fn persistence_keeps_inputs() {
        let t = build((0..50).map(f64::from));
        let (a, _) = split(&t, &|v: &Vertex| v.x < 25.0);
        assert_eq!(size(&t), 50);
        assert_eq!(size(&a), 25);
        validate(&t).unwrap();
    }
}
