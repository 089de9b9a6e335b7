//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use orloj::dist::EmpiricalHistogram;
use rand::Rng;

/// Random histogram with `bins` bins of random widths; a few bins may be
/// empty but at least one carries mass.
pub fn random_hist(rng: &mut impl Rng, bins: usize) -> EmpiricalHistogram {
    let mut edges = vec![rng.random_range(0.0..50.0)];
    for _ in 0..bins {
        let last = *edges.last().unwrap();
        edges.push(last + rng.random_range(0.5..30.0));
    }
    let mut counts: Vec<f64> = (0..bins)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random_range(1..50) as f64
            }
        })
        .collect();
    if counts.iter().all(|&c| c == 0.0) {
        counts[0] = 1.0;
    }
    EmpiricalHistogram::new(edges, counts).unwrap()
}

/// CDF straight from edges and counts: full bins below `l`, a linear share
/// of the bin containing it, atoms once `l` reaches them.
pub fn cdf_oracle(h: &EmpiricalHistogram, l: f64) -> f64 {
    let e = h.edges();
    let mut acc = 0.0;
    for (i, &c) in h.counts().iter().enumerate() {
        let (a, b) = (e[i], e[i + 1]);
        if l >= b {
            acc += c;
        } else if l > a {
            acc += c * (l - a) / (b - a);
        }
    }
    acc / h.total()
}

/// Draw from the histogram: bin by mass, uniform inside it.
pub fn sample(h: &EmpiricalHistogram, rng: &mut impl Rng) -> f64 {
    let mut u = rng.random_range(0.0..h.total());
    let e = h.edges();
    for (i, &c) in h.counts().iter().enumerate() {
        if u < c || i + 1 == h.counts().len() {
            return e[i] + (e[i + 1] - e[i]) * rng.random_range(0.0..1.0);
        }
        u -= c;
    }
    unreachable!()
}

/// Mean and standard error of `n` Monte Carlo draws of `f`.
pub fn monte_carlo(n: usize, mut f: impl FnMut() -> f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let x = f();
        sum += x;
        sq += x * x;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Mean of a histogram by integrating l against its bin densities.
pub fn mean_oracle(h: &EmpiricalHistogram) -> f64 {
    let e = h.edges();
    h.counts()
        .iter()
        .enumerate()
        .map(|(i, &c)| c * 0.5 * (e[i] + e[i + 1]))
        .sum::<f64>()
        / h.total()
}

/// Expected cost reduction rate of running now instead of after an
/// exponential delay, for a step cost (deadline `d`, penalty `c`) and batch
/// latency `h`:
/// `(E[C(t + tau + L)] - E[C(t + L)]) / E[L]`.
/// The expectation over L is numerical; for fixed L the expectation over tau
/// is its survival function.
pub fn score_oracle(h: &EmpiricalHistogram, d: f64, c: f64, b: f64, t: f64) -> f64 {
    // P(t + tau + l > d) for fixed l
    let delayed = |l: f64| {
        let slack = d - t - l;
        if slack <= 0.0 {
            c
        } else {
            c * (-b * slack).exp()
        }
    };
    // the cost of running now is 0 before the kink and c after it
    let before = |l: f64| delayed(l);
    let after = |l: f64| delayed(l) - c;
    let e = h.edges();
    let mut total = 0.0;
    for (i, &m) in h.counts().iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let (lo, hi) = (e[i], e[i + 1]);
        let p = m / h.total();
        if hi == lo {
            total += p * if t + lo > d { after(lo) } else { before(lo) };
            continue;
        }
        let dens = p / (hi - lo);
        let kink = (d - t).clamp(lo, hi);
        total += dens * (simpson(lo, kink, 400, before) + simpson(kink, hi, 400, after));
    }
    total / mean_oracle(h)
}

pub mod alg1;
pub mod long_run;
