//! Gauss–Legendre quadrature: fixed rules and a bisection-adaptive driver.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let nf = order as f64;
        let half = order.div_ceil(2);
        for i in 0..half {
            // Tricomi's initial guess for the i-th largest root.
            let theta = PI * (4.0 * i as f64 + 3.0) / (4.0 * nf + 2.0);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_deriv(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[order - 1 - i] = x;
            weights[order - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared, memoized rule of the given order.
    pub fn cached(order: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&order) {
            return Arc::clone(r);
        }
        let rule = Arc::new(GaussLegendre::new(order));
        cache.lock().expect("quadrature cache poisoned").entry(order).or_insert_with(|| Arc::clone(&rule)).clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the Bonnet recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive integration by recursive bisection of fixed-order panels.
///
/// A panel is accepted when its value and the sum over its halves agree to
/// `rel_tol` relative to the running magnitude of the whole integral.
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, f: F) -> f64 {
    adaptive_with_order(a, b, rel_tol, 20, f)
}

/// [`adaptive`] with panels of the given Gauss–Legendre order.
pub fn adaptive_with_order<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, order: usize, mut f: F) -> f64 {
    let rule = GaussLegendre::cached(order.max(2));
    let whole = rule.integrate(a, b, &mut f);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, val, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let refined = left + right;
        if (refined - val).abs() <= rel_tol * scale || depth >= 40 {
            total += refined;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    total
}
