//! Correlation kernels of the two ensembles, Hermite functions and the
//! semicircle density.
//!
//! GUE eigenvalues follow the density proportional to
//! `prod |l_i - l_j|^2 exp(-n sum l_i^2 / 2)`, whose correlation kernel is
//! built from `phi_k(x) = n^(1/4) psi_k(x sqrt(n))`, `k < n`.

use crate::error::{Error, Result};
use crate::Real;

/// Highest Hermite order accepted by [`hermite_psi`].
pub const DEFAULT_MAX_ORDER: usize = 4096;

/// Rescaling threshold for the Hermite recurrence.
const BIG: f64 = 1e150;

/// CUE kernel `sin(n(x-y)/2) / (2 pi sin((x-y)/2))`, equal to `n/(2 pi)` on
/// the diagonal.
pub fn cue_kernel<T: Real>(n: usize, x: T, y: T) -> T {
    let two = T::lit(2.0);
    let d = (x - y) / two;
    let s = d.sin();
    let nn = T::of_usize(n);
    if s.abs() <= T::epsilon() * T::lit(16.0) * (T::one() + d.abs()) {
        // d is a multiple of pi: the ratio tends to n cos(n d)/cos(d).
        let sign = (nn * d).cos() / d.cos();
        return nn * sign / (two * T::PI());
    }
    (nn * d).sin() / (two * T::PI() * s)
}

/// `psi_k(x)` via the normalized three-term recurrence.
pub fn hermite_psi<T: Real>(k: usize, x: T) -> Result<T> {
    hermite_psi_with_max(k, x, DEFAULT_MAX_ORDER)
}

/// [`hermite_psi`] with an explicit order cap.
pub fn hermite_psi_with_max<T: Real>(k: usize, x: T, max_order: usize) -> Result<T> {
    if k > max_order {
        return Err(Error::OrderOverflow { k, max: max_order });
    }
    let (_, pk) = hermite_pair(k, x);
    Ok(pk)
}

/// Returns `(psi_{k-1}(x), psi_k(x))`, with `psi_{-1} = 0`.
///
/// The Gaussian factor is applied at the end in log form so that seeds which
/// would underflow for large `|x|` do not zero out orders that are still
/// representable.
pub fn hermite_pair<T: Real>(k: usize, x: T) -> (T, T) {
    let quarter = T::lit(0.25);
    let mut log_scale = -x * x * quarter;
    let c0 = (T::lit(2.0) * T::PI()).powf(-quarter);
    let mut prev = T::zero();
    let mut cur = c0;
    let big = T::max_value().sqrt().min(T::lit(BIG));
    for j in 0..k {
        let jf = T::of_usize(j);
        let next = (x * cur - jf.sqrt() * prev) / (jf + T::one()).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > big {
            prev = prev / big;
            cur = cur / big;
            log_scale = log_scale + big.ln();
        }
    }
    (apply_scale(prev, log_scale), apply_scale(cur, log_scale))
}

/// `v * exp(log_scale)` without spurious underflow of the factor alone.
fn apply_scale<T: Real>(v: T, log_scale: T) -> T {
    let lim = T::lit(600.0);
    if log_scale.abs() < lim || v == T::zero() {
        return v * log_scale.exp();
    }
    v.signum() * (v.abs().ln() + log_scale).exp()
}

/// All of `psi_0(x), ..., psi_{m-1}(x)`.
pub fn hermite_all(m: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    let mut log_scale = -x * x / 4.0;
    let c0 = (2.0 * std::f64::consts::PI).powf(-0.25);
    let mut raw = Vec::with_capacity(m);
    let mut scales = Vec::with_capacity(m);
    let mut prev = 0.0;
    let mut cur = c0;
    raw.push(cur);
    scales.push(log_scale);
    for j in 0..m - 1 {
        let jf = j as f64;
        let next = (x * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
        }
        raw.push(cur);
        scales.push(log_scale);
    }
    for (r, s) in raw.into_iter().zip(scales) {
        out.push(apply_scale(r, s));
    }
    out
}

/// `psi_k'(x) = -(x/2) psi_k(x) + sqrt(k) psi_{k-1}(x)`.
pub fn hermite_psi_deriv<T: Real>(k: usize, x: T) -> T {
    let (pm, pk) = hermite_pair(k, x);
    -x / T::lit(2.0) * pk + T::of_usize(k).sqrt() * pm
}

/// GUE kernel in the eigenvalue scale of the density above.
pub fn gue_kernel<T: Real>(n: usize, x: T, y: T) -> T {
    let rn = T::of_usize(n).sqrt();
    let (xs, ys) = (x * rn, y * rn);
    let (px_m, px) = hermite_pair(n, xs);
    if x == y {
        // Confluent limit: n (psi_n' psi_{n-1} - psi_n psi_{n-1}').
        let half = T::lit(0.5);
        let dn = -xs * half * px + rn * px_m;
        let (pmm, _) = hermite_pair(n - 1, xs);
        let dm = -xs * half * px_m + T::of_usize(n - 1).sqrt() * pmm;
        return T::of_usize(n) * (dn * px_m - px * dm);
    }
    let (py_m, py) = hermite_pair(n, ys);
    rn * (px * py_m - px_m * py) / (x - y)
}

/// Semicircle density `sqrt((4 - x^2)_+) / (2 pi)`.
pub fn rho_sc<T: Real>(x: T) -> T {
    let v = T::lit(4.0) - x * x;
    if v <= T::zero() {
        return T::zero();
    }
    v.sqrt() / (T::lit(2.0) * T::PI())
}

/// Semicircle distribution function.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    0.5 + (x * (4.0 - x * x).sqrt() / 4.0 + (x / 2.0).asin()) / pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn cue_kernel_values() {
        assert_abs_diff_eq!(cue_kernel(5, 1.0, 1.0), 0.795_775, epsilon = 1e-6);
        assert_abs_diff_eq!(cue_kernel(2, PI, 0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cue_kernel(3, PI / 2.0, 0.0), 0.159_155, epsilon = 1e-6);
        // Half-integer frequencies make the even-n kernel flip sign over a full turn.
        assert_abs_diff_eq!(cue_kernel(4, 2.0 * PI, 0.0), -4.0 / (2.0 * PI), epsilon = 1e-12);
        assert_abs_diff_eq!(cue_kernel(3, 2.0 * PI, 0.0), 3.0 / (2.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn hermite_values() {
        assert_abs_diff_eq!(hermite_psi(0, 0.0).unwrap(), 0.631_619, epsilon = 1e-6);
        assert_abs_diff_eq!(hermite_psi(1, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hermite_psi(2, 0.0).unwrap(), -(2.0 * PI).powf(-0.25) / 2f64.sqrt(), epsilon = 1e-14);
        assert!(matches!(hermite_psi(4097, 0.0), Err(Error::OrderOverflow { k: 4097, max: 4096 })));
        assert!(hermite_psi(4096, 3.0f64).unwrap().is_finite());
    }

    #[test]
    fn hermite_f32_matches_f64() {
        for k in [0usize, 3, 10] {
            let a = hermite_psi(k, 0.7f32).unwrap() as f64;
            let b = hermite_psi(k, 0.7f64).unwrap();
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn hermite_far_tail_is_not_flushed() {
        // psi_1000 near its turning point 2 sqrt(1000) ~ 63.2: the seed
        // exp(-x^2/4) underflows but the value itself is of moderate size.
        let v: f64 = hermite_psi(1000, 66.0).unwrap();
        assert!(v.abs() > 1e-10 && v.abs() < 1.0, "{v}");
        let all = hermite_all(1001, 66.0);
        assert!((all[1000] - v).abs() <= 1e-12 * v.abs());
    }

    #[test]
    fn hermite_all_matches_pointwise() {
        let all = hermite_all(40, 1.3);
        for (k, v) in all.iter().enumerate() {
            assert_abs_diff_eq!(*v, hermite_psi(k, 1.3).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let h = 1e-6;
        for k in [0usize, 1, 5, 17] {
            let fd = (hermite_psi(k, 0.4 + h).unwrap() - hermite_psi(k, 0.4 - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(hermite_psi_deriv(k, 0.4), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn gue_kernel_values() {
        assert_abs_diff_eq!(gue_kernel(1, 0.0, 0.0), 0.398_942, epsilon = 1e-6);
        assert_abs_diff_eq!(gue_kernel(4, 0.1, -0.3), gue_kernel(4, -0.3, 0.1), epsilon = 1e-15);
        // Near-diagonal values approach the confluent limit.
        let d = gue_kernel(7, 0.3, 0.3);
        assert_abs_diff_eq!(gue_kernel(7, 0.3, 0.3 + 1e-7), d, epsilon = 1e-6);
    }

    #[test]
    fn rho_values() {
        assert_abs_diff_eq!(rho_sc(0.0), std::f64::consts::FRAC_1_PI, epsilon = 1e-15);
        assert_eq!(rho_sc(2.0), 0.0);
        assert_eq!(rho_sc(-2.0), 0.0);
        assert_abs_diff_eq!(rho_sc(1.0), 0.275_664, epsilon = 1e-6);
        assert_abs_diff_eq!(semicircle_cdf(0.0), 0.5, epsilon = 1e-15);
    }
}
