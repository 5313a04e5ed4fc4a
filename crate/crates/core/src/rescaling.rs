//! Gap rescaling maps, bulk-interval constants, the Gumbel-k laws and
//! finite-n evaluations of the rescaling limits.
//!
//! With `L = ln n`:
//!
//! * `F_n(x) = (8x + 3 ln(2L)) / (2n sqrt(2L)) + sqrt(32 L) / n`
//! * `G_n(x) = (8x - 5 ln(2L)) / (2n sqrt(2L)) + sqrt(32 L) / n`
//! * `tau = sqrt(2L) (n m - sqrt(32 L)) / 4 - (3/8) ln(2L)` inverts `m = F_n(tau)`
//! * `tau* = sqrt(2L) (n S(I) m* - sqrt(32 L)) / 4 + (5/8) ln(2L)` inverts
//!   `S(I) m* = G_n(tau*)`

use crate::error::{Error, Result};
use crate::holeprob::log_hole_cue;
use crate::quad;
use crate::Real;

/// Dimension with the quantities every rescaling formula needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleParams<T> {
    /// Dimension as a real number; formulas accept non-integer values.
    pub n: T,
    /// Integer dimension for determinant evaluations; `None` when `n` is
    /// not an integer.
    pub dim: Option<usize>,
    pub ln_n: T,
    pub c0_hat: T,
    /// `c0_hat + ln(pi/2)`.
    pub c1: T,
}

impl<T: Real> RescaleParams<T> {
    pub fn new(n: usize, c0_hat: T) -> Result<Self> {
        let mut p = Self::from_real(T::of_usize(n), c0_hat)?;
        p.dim = Some(n);
        Ok(p)
    }

    /// Formula-only parameters for a real dimension `n >= 3`.
    pub fn from_real(n: T, c0_hat: T) -> Result<Self> {
        if !(n >= T::lit(3.0)) || !n.is_finite() {
            return Err(Error::InvalidInput(format!("rescaling needs n >= 3, got {n}")));
        }
        let dim = (n.fract() == T::zero()).then(|| n.to_usize()).flatten();
        Ok(RescaleParams { n, dim, ln_n: n.ln(), c0_hat, c1: c0_hat + (T::FRAC_PI_2()).ln() })
    }

    /// `(2 ln n)^(1/2)`.
    pub fn sqrt_2ln(&self) -> T {
        (T::lit(2.0) * self.ln_n).sqrt()
    }

    /// `ln(2 ln n)`.
    pub fn ln_2ln(&self) -> T {
        (T::lit(2.0) * self.ln_n).ln()
    }

    /// `(32 ln n)^(1/2) / n`, the leading gap scale.
    pub fn gap_scale(&self) -> T {
        (T::lit(32.0) * self.ln_n).sqrt() / self.n
    }

    /// `c0_hat + M0(I)`.
    pub fn c2(&self, interval: &BulkInterval<T>) -> Result<T> {
        Ok(self.c0_hat + m0_of_interval(interval)?)
    }

    fn require_dim(&self) -> Result<usize> {
        self.dim.ok_or_else(|| Error::InvalidInput(format!("n = {} is not an integer dimension", self.n)))
    }
}

/// A compact interval strictly inside `(-2, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkInterval<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> BulkInterval<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        let two = T::lit(2.0);
        if !(-two < a && a < b && b < two) {
            return Err(Error::InvalidInput(format!("bulk interval needs -2 < a < b < 2, got [{a}, {b}]")));
        }
        Ok(BulkInterval { a, b })
    }

    pub fn contains(&self, x: T) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn length(&self) -> T {
        self.b - self.a
    }
}

/// Gumbel-k law with location `c`: the limit law of the k-th largest
/// rescaled gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelLaw<T> {
    pub location: T,
    pub order: usize,
}

impl<T: Real> GumbelLaw<T> {
    pub fn new(location: T, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("Gumbel order k must be at least 1".into()));
        }
        Ok(GumbelLaw { location, order })
    }

    pub fn cdf(&self, x: T) -> T {
        gumbel_k_cdf(self, x)
    }

    pub fn pdf(&self, x: T) -> T {
        gumbel_k_pdf(self, x)
    }
}

pub fn f_n<T: Real>(p: &RescaleParams<T>, x: T) -> T {
    (T::lit(8.0) * x + T::lit(3.0) * p.ln_2ln()) / (T::lit(2.0) * p.n * p.sqrt_2ln()) + p.gap_scale()
}

pub fn g_n<T: Real>(p: &RescaleParams<T>, x: T) -> T {
    (T::lit(8.0) * x - T::lit(5.0) * p.ln_2ln()) / (T::lit(2.0) * p.n * p.sqrt_2ln()) + p.gap_scale()
}

pub fn tau_from_gap_cue<T: Real>(p: &RescaleParams<T>, m: T) -> T {
    let four = T::lit(4.0);
    p.sqrt_2ln() * (p.n * m - (T::lit(32.0) * p.ln_n).sqrt()) / four - T::lit(0.375) * p.ln_2ln()
}

pub fn tau_from_gap_gue<T: Real>(p: &RescaleParams<T>, m_star: T, interval: &BulkInterval<T>) -> T {
    let four = T::lit(4.0);
    let s = s_of_interval(interval);
    p.sqrt_2ln() * (p.n * s * m_star - (T::lit(32.0) * p.ln_n).sqrt()) / four + T::lit(0.625) * p.ln_2ln()
}

/// `inf_I sqrt(4 - x^2)`.
pub fn s_of_interval<T: Real>(i: &BulkInterval<T>) -> T {
    let four = T::lit(4.0);
    (four - i.a * i.a).sqrt().min((four - i.b * i.b).sqrt())
}

/// Endpoint carrying the constant: `a` when `a + b < 0`, `b` when
/// `a + b > 0`, and `a` (doubled weight) in the symmetric case.
fn governing_endpoint<T: Real>(i: &BulkInterval<T>) -> Result<(T, bool)> {
    let sum = i.a + i.b;
    let (e, symmetric) = if sum < T::zero() {
        (i.a, false)
    } else if sum > T::zero() {
        (i.b, false)
    } else {
        (i.a, true)
    };
    if e == T::zero() {
        return Err(Error::UndefinedConstant {
            a: i.a.to_f64().unwrap_or(f64::NAN),
            b: i.b.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((e, symmetric))
}

pub fn m_of_interval<T: Real>(i: &BulkInterval<T>) -> Result<T> {
    let (e, symmetric) = governing_endpoint(i)?;
    let base = (T::lit(4.0) - e * e) / e.abs();
    Ok(if symmetric { T::lit(2.0) * base } else { base })
}

pub fn m0_of_interval<T: Real>(i: &BulkInterval<T>) -> Result<T> {
    let (e, symmetric) = governing_endpoint(i)?;
    let head = T::lit(1.5) * (T::lit(4.0) - e * e).ln();
    let div = if symmetric { T::lit(2.0) } else { T::lit(4.0) };
    Ok(head - (div * e.abs()).ln())
}

fn ln_factorial<T: Real>(k: usize) -> T {
    (2..=k).map(|j| T::of_usize(j).ln()).fold(T::zero(), |a, b| a + b)
}

/// `lambda^k e^(-lambda) / (k-1)!` with `lambda = e^(c - x)`.
pub fn gumbel_k_pdf<T: Real>(law: &GumbelLaw<T>, x: T) -> T {
    let ll = law.location - x;
    let k = T::of_usize(law.order);
    (k * ll - ll.exp() - ln_factorial::<T>(law.order - 1)).exp()
}

/// `sum_{j<k} lambda^j e^(-lambda) / j!`.
pub fn gumbel_k_cdf<T: Real>(law: &GumbelLaw<T>, x: T) -> T {
    let ll = law.location - x;
    let lam = ll.exp();
    let mut total = T::zero();
    for j in 0..law.order {
        total = total + (T::of_usize(j) * ll - lam - ln_factorial::<T>(j)).exp();
    }
    total.min(T::one())
}

fn arc_arg<T: Real>(alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::PI()) {
        return Err(Error::InvalidInput(format!("half-arc {alpha} outside (0, pi)")));
    }
    Ok(alpha)
}

/// `n (2 ln n)^(1/2) D_n(F_n(x)/2)`.
pub fn check_lemma1<T: Real>(p: &RescaleParams<T>, x: T) -> Result<T> {
    let n = p.require_dim()?;
    let alpha = arc_arg(f_n(p, x) / T::lit(2.0))?;
    Ok(p.n * p.sqrt_2ln() * log_hole_cue(n, alpha)?.log_prob.exp())
}

/// `n (2 ln n)^(-1/2) D_n((1 + z/ln n) G_n(x)/2)`; tends to `e^(c0 - x - 2z)`.
pub fn check_lemma8<T: Real>(p: &RescaleParams<T>, x: T, z: T) -> Result<T> {
    let n = p.require_dim()?;
    let alpha = arc_arg((T::one() + z / p.ln_n) * g_n(p, x) / T::lit(2.0))?;
    Ok(p.n / p.sqrt_2ln() * log_hole_cue(n, alpha)?.log_prob.exp())
}

/// Log form of the bound `D_n(w G_n(x)/2) <= e^(1 - (w-1) ln n) D_n(G_n(x)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma9Record<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

pub fn check_lemma9<T: Real>(p: &RescaleParams<T>, x: T, w: T) -> Result<Lemma9Record<T>> {
    let n = p.require_dim()?;
    let half = g_n(p, x) / T::lit(2.0);
    if w < T::one() {
        return Err(Error::InvalidInput(format!("w = {w} must be at least 1")));
    }
    if !(w * half < T::FRAC_PI_2()) || !(half > T::zero()) {
        return Err(Error::InvalidInput(format!("w G_n(x)/2 = {} outside (0, pi/2)", w * half)));
    }
    let lhs = log_hole_cue(n, w * half)?.log_prob;
    let rhs = T::one() - (w - T::one()) * p.ln_n + log_hole_cue(n, half)?.log_prob;
    Ok(Lemma9Record { lhs, rhs, holds: lhs <= rhs })
}

/// `n (2 ln n)^(1/2) int_I D_n(sqrt(4 - y^2)/S(I) G_n(x)/2) dy`; tends to
/// `M(I) e^(c0 - x)`.
///
/// `n_quad` is the panel order of the adaptive Gauss–Legendre driver.
pub fn check_lemma10(p: &RescaleParams<f64>, x: f64, interval: &BulkInterval<f64>, n_quad: usize) -> Result<f64> {
    let n = p.require_dim()?;
    let s = s_of_interval(interval);
    let g = g_n(p, x);
    for y in [interval.a, interval.b, 0.0f64.clamp(interval.a, interval.b)] {
        arc_arg((4.0 - y * y).sqrt() / s * g / 2.0)?;
    }
    let mut failure = None;
    let integral = quad::adaptive_with_order(interval.a, interval.b, 1e-10, n_quad, |y| {
        let alpha = (4.0 - y * y).sqrt() / s * g / 2.0;
        match log_hole_cue(n, alpha) {
            Ok(r) => r.log_prob.exp(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(p.n * p.sqrt_2ln() * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn e2() -> RescaleParams<f64> {
        RescaleParams::from_real(E * E, 0.0).unwrap()
    }

    #[test]
    fn map_values() {
        let p = e2();
        let f0 = 3.0 * 4f64.ln() / (4.0 * E * E) + 8.0 / (E * E);
        assert_abs_diff_eq!(f_n(&p, 0.0), f0, epsilon = 1e-13);
        assert_abs_diff_eq!(f_n(&p, 0.0), 1.223_393, epsilon = 1e-6);
        assert_abs_diff_eq!(g_n(&p, 0.0), -5.0 * 4f64.ln() / (4.0 * E * E) + 8.0 / (E * E), epsilon = 1e-13);
        assert_abs_diff_eq!(tau_from_gap_cue(&p, f0), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(tau_from_gap_cue(&p, f_n(&p, 0.0)), 0.0, epsilon = 1e-12);
        assert!(RescaleParams::new(2usize, 0.0f64).is_err());
    }

    #[test]
    fn map_difference_identity() {
        let p = RescaleParams::new(1000, -0.4).unwrap();
        let expect = -8.0 * p.ln_2ln() / (2.0 * p.n * p.sqrt_2ln());
        for x in [-2.0, 0.0, 1.5] {
            assert_abs_diff_eq!(g_n(&p, x) - f_n(&p, x), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn leading_scale_trend() {
        let ratios: Vec<f64> = [1e3, 1e6, 1e9]
            .iter()
            .map(|&n| {
                let p = RescaleParams::<f64>::from_real(n, 0.0).unwrap();
                n * f_n(&p, 0.0) / (32.0 * p.ln_n).sqrt()
            })
            .collect();
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2] && ratios[2] > 1.0);
    }

    #[test]
    fn interval_constants() {
        let iv = |a, b| BulkInterval::new(a, b).unwrap();
        assert_abs_diff_eq!(s_of_interval(&iv(-1.0, 1.0)), 1.732_051, epsilon = 1e-6);
        assert_abs_diff_eq!(s_of_interval(&iv(0.5, 1.5)), 1.322_876, epsilon = 1e-6);
        assert_abs_diff_eq!(s_of_interval(&iv(-1.5, -0.5)), 1.75f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m_of_interval(&iv(-1.0, -0.5)).unwrap(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m_of_interval(&iv(0.5, 1.0)).unwrap(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m_of_interval(&iv(-1.0, 1.0)).unwrap(), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m0_of_interval(&iv(-1.0, -0.5)).unwrap(), 0.261_624, epsilon = 1e-6);
        assert_abs_diff_eq!(m0_of_interval(&iv(-1.0, 1.0)).unwrap(), 1.5 * 3f64.ln() - 2f64.ln(), epsilon = 1e-14);
        assert!(m_of_interval(&iv(-1.0, 0.0)).is_ok());
        // The governing endpoint of a valid interval is never 0.
        assert_abs_diff_eq!(m_of_interval(&iv(0.0, 1.0)).unwrap(), 3.0, epsilon = 1e-14);
        assert!(BulkInterval::new(-2.0, 1.0).is_err());
    }

    #[test]
    fn gumbel_values() {
        let g1 = GumbelLaw::new(0.3, 1).unwrap();
        assert_abs_diff_eq!(g1.pdf(0.3), 0.367_879, epsilon = 1e-6);
        assert_abs_diff_eq!(g1.cdf(0.3), 0.367_879, epsilon = 1e-6);
        let g2 = GumbelLaw::new(0.3, 2).unwrap();
        assert_abs_diff_eq!(g2.cdf(0.3), 0.735_759, epsilon = 1e-6);
        assert!(GumbelLaw::new(0.0, 0).is_err());
    }

    #[test]
    fn gumbel_f32_alias() {
        let g = crate::GumbelLaw32::new(0.0, 1).unwrap();
        assert!((g.cdf(0.0) - 0.367_879).abs() < 1e-6);
    }

    #[test]
    fn lemma9_unit_weight_has_unit_slack() {
        let p = RescaleParams::new(256, 0.0).unwrap();
        let r = check_lemma9(&p, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.rhs - r.lhs, 1.0, epsilon = 1e-12);
        assert!(r.holds);
    }
}
