//! Quadrature building blocks: cached Gauss-Legendre rules and exact
//! interval recovery for indicator integrands.
//!
//! Indicator sources make product rules useless along the direction that
//! crosses the jump, so the engines integrate such directions exactly: scan
//! for sign changes of the interior predicate, refine each crossing by
//! bisection, and sum interval lengths. Smooth directions keep spectral
//! Gauss rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes (ascending) and weights of the n-point Gauss-Legendre rule on
/// [-1, 1], computed once per order and shared.
pub(crate) fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The n-point Gauss-Legendre rule mapped onto [a, b], as (node, weight)
/// pairs. Empty when the interval is degenerate.
pub(crate) fn gauss_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    if !(b > a) {
        return Vec::new();
    }
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(rule.1.iter())
        .map(|(&x, &w)| (mid + half * x, half * w))
        .collect()
}

/// Maximal sub-intervals of [a, b] on which `pred` holds, to absolute
/// boundary accuracy ~1e-13 (b - a). The predicate is scanned at `scan`
/// uniformly spaced cells; features narrower than one cell can be missed,
/// so `scan` must resolve the geometry being probed.
pub(crate) fn bracket_true_intervals(
    pred: &dyn Fn(f64) -> bool,
    a: f64,
    b: f64,
    scan: usize,
) -> Vec<(f64, f64)> {
    if !(b > a) || scan < 2 {
        return Vec::new();
    }
    let n = scan;
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vals: Vec<bool> = xs.iter().map(|&x| pred(x)).collect();
    let refine = |mut lo: f64, mut hi: f64| {
        // invariant: pred(lo) != pred(hi)
        let flip = pred(lo);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if pred(mid) == flip {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (b - a) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let mut out = Vec::new();
    let mut start: Option<f64> = if vals[0] { Some(a) } else { None };
    for i in 0..n {
        match (vals[i], vals[i + 1]) {
            (false, true) => start = Some(refine(xs[i], xs[i + 1])),
            (true, false) => {
                let end = refine(xs[i], xs[i + 1]);
                if let Some(s) = start.take() {
                    if end > s {
                        out.push((s, end));
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if b > s {
            out.push((s, b));
        }
    }
    out
}
