//! Exact hole probabilities.
//!
//! * CUE, single arc of size `2 alpha`: the Toeplitz determinant `D_n(alpha)`
//!   by Levinson recursion in log space.
//! * CUE, union of arcs: `det(I_n - G)` with `G` the Gram matrix of the
//!   Fourier basis over the arcs.
//! * GUE, union of intervals: `det(I_n - G)` with `G` the Gram matrix of the
//!   scaled Hermite functions over the intervals, by Gauss–Legendre.
//!
//! Toeplitz determinants of an arc indicator have pivots that shrink like
//! `cos(alpha/2)^(2k)` while the predictor coefficients grow like
//! `(1 + sin(alpha/2))^k`, so the recursion cancels about
//! `n (ln(1 + sin(alpha/2)) + 2 |ln cos(alpha/2)|)` nats. When that exceeds
//! what the scalar type can absorb, the recursion is rerun in binary
//! floating point with enough bits to cover the loss.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::bigfloat::{self, BigFloat, Ctx};
use crate::error::{Error, Result};
use crate::kernels::hermite_all;
use crate::linalg::{self, LogDet, PIVOT_FLOOR};
use crate::quad::GaussLegendre;
use crate::Real;

const TAU: f64 = 2.0 * PI;

/// Accuracy of the CUE Gram determinant relative to `max(|ln P|, 1)`: the
/// f64 result is kept when its rounding estimate is below it, and two
/// extended-precision runs must agree to it otherwise.
pub const GRAM_EXTENDED_TOL: f64 = 1e-12;

/// Precision doublings tried by the extended Gram path.
const GRAM_EXTENDED_ATTEMPTS: usize = 4;

/// Largest `|x|` at which the GUE basis is integrated.
pub const GUE_DOMAIN: f64 = 10.0;

/// Matrices up to this side use dense Hermitian Cholesky; larger ones the
/// Hermitian Toeplitz Levinson recursion.
pub const DENSE_GRAM_LIMIT: usize = 256;

/// Absolute tolerance on `log_prob` for the GUE quadrature doubling check,
/// scaled by `max(1, |log_prob|)`.
pub const GUE_QUAD_TOL: f64 = 1e-8;

/// Fit disagreement across alphas above which [`estimate_c0`] fails.
pub const C0_SPREAD_LIMIT: f64 = 1e-2;

/// A finite union of closed arcs `[start, start + length]` on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcUnion {
    arcs: Vec<(f64, f64)>,
}

impl ArcUnion {
    /// Validates and normalizes: starts reduced to `[0, 2 pi)`, sorted.
    pub fn new(arcs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (s, l) in arcs {
            if !s.is_finite() || !l.is_finite() || l <= 0.0 || l >= TAU {
                return Err(Error::InvalidInput(format!("arc ({s}, {l}) needs finite start and length in (0, 2pi)")));
            }
            v.push((s.rem_euclid(TAU), l));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = v.iter().map(|a| a.1).sum();
        if total >= TAU {
            return Err(Error::InvalidInput(format!("total arc length {total} >= 2pi")));
        }
        let slack = 1e-12;
        for i in 0..v.len() {
            let (s, l) = v[i];
            let next = if i + 1 < v.len() { v[i + 1].0 } else { v[0].0 + TAU };
            if v.len() > 1 && s + l > next + slack {
                return Err(Error::InvalidInput(format!("arcs starting at {s} and {} overlap", next.rem_euclid(TAU))));
            }
        }
        Ok(ArcUnion { arcs: v })
    }

    pub fn empty() -> Self {
        ArcUnion { arcs: Vec::new() }
    }

    pub fn single(start: f64, length: f64) -> Result<Self> {
        Self::new([(start, length)])
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.arcs.iter().map(|a| a.1).sum()
    }

    pub fn rotated(&self, s: f64) -> Self {
        Self::new(self.arcs.iter().map(|&(a, l)| (a + s, l))).expect("rotation preserves validity")
    }

    /// Union with a disjoint family.
    pub fn union(&self, other: &ArcUnion) -> Result<Self> {
        Self::new(self.arcs.iter().chain(&other.arcs).copied())
    }

    /// True when `theta` lies in some arc (closed).
    pub fn contains(&self, theta: f64) -> bool {
        let t = theta.rem_euclid(TAU);
        self.arcs.iter().any(|&(s, l)| {
            let d = (t - s).rem_euclid(TAU);
            d <= l
        })
    }
}

/// A finite union of closed intervals on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = intervals.into_iter().collect();
        for &(lo, hi) in &v {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] needs lo < hi")));
            }
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in v.windows(2) {
            if w[0].1 > w[1].0 + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(IntervalUnion { intervals: v })
    }

    pub fn empty() -> Self {
        IntervalUnion { intervals: Vec::new() }
    }

    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn union(&self, other: &IntervalUnion) -> Result<Self> {
        Self::new(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }
}

/// How a hole probability was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Toeplitz,
    GramCue,
    GramGue,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Toeplitz => "toeplitz",
            Method::GramCue => "gram_cue",
            Method::GramGue => "gram_gue",
        }
    }
}

/// A log hole probability with conditioning diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleResult<T> {
    /// Natural log of the probability; `-inf` for a singular determinant.
    pub log_prob: T,
    pub method: Method,
    /// Smallest pivot met; `0` when a pivot fell below the floor.
    pub min_pivot: T,
    /// Mantissa bits of the arithmetic that produced `log_prob`.
    pub precision_bits: u32,
}

impl<T: Real> HoleResult<T> {
    pub fn prob(&self) -> T {
        self.log_prob.exp()
    }

    fn certain(method: Method) -> Self {
        HoleResult { log_prob: T::zero(), method, min_pivot: T::one(), precision_bits: mantissa_bits::<T>() }
    }

    fn singular(method: Method, pivot: T) -> Self {
        HoleResult {
            log_prob: T::neg_infinity(),
            method,
            min_pivot: pivot.max(T::zero()),
            precision_bits: mantissa_bits::<T>(),
        }
    }
}

fn mantissa_bits<T: Real>() -> u32 {
    (-T::epsilon().log2()).to_u32().map_or(53, |b| b + 1)
}

/// `(1/2pi) int_alpha^{2pi - alpha} e^{i m theta} d theta`.
pub fn toeplitz_entry<T: Real>(m: i64, alpha: T) -> T {
    if m == 0 {
        return T::one() - alpha / T::PI();
    }
    let mf = T::from_i64(m).expect("index fits scalar");
    -(mf * alpha).sin() / (T::PI() * mf)
}

/// Upper estimate of the nats cancelled by the Levinson recursion for
/// `D_n(alpha)`: twice the combined predictor growth and pivot decay, since
/// the observed loss runs up to about 1.6 times that product.
pub fn levinson_cancellation(n: usize, alpha: f64) -> f64 {
    let h = 0.5 * alpha;
    let c = h.cos();
    if c <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * n as f64 * ((1.0 + h.sin()).ln() - 2.0 * c.ln())
}

/// `ln D_n(alpha)`, the log probability that an arc of size `2 alpha`
/// contains no CUE eigenangle.
pub fn log_hole_cue<T: Real>(n: usize, alpha: T) -> Result<HoleResult<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let af = alpha.to_f64().unwrap_or(f64::NAN);
    if !(0.0..=PI).contains(&af) {
        return Err(Error::InvalidInput(format!("alpha = {af} outside [0, pi]")));
    }
    if alpha == T::zero() {
        return Ok(HoleResult::certain(Method::Toeplitz));
    }
    if alpha >= T::PI() {
        return Ok(HoleResult::singular(Method::Toeplitz, T::zero()));
    }
    let loss = levinson_cancellation(n, af);
    let budget = (1e-3 / T::epsilon().to_f64().unwrap_or(1.0).sqrt()).ln();
    if loss <= budget {
        let t: Vec<T> = (0..n as i64).map(|m| toeplitz_entry(m, alpha)).collect();
        if let LogDet::Ok { logdet, min_pivot } = levinson_logdet_sym(&t) {
            return Ok(HoleResult {
                log_prob: logdet,
                method: Method::Toeplitz,
                min_pivot,
                precision_bits: mantissa_bits::<T>(),
            });
        }
        // Roundoff broke positivity: retry on the dense matrix.
        let mut dense = vec![T::zero(); n * n];
        for j in 0..n {
            for k in 0..n {
                dense[j * n + k] = t[j.abs_diff(k)];
            }
        }
        if let LogDet::Ok { logdet, min_pivot } = linalg::cholesky_logdet(&mut dense, n) {
            return Ok(HoleResult {
                log_prob: logdet,
                method: Method::Toeplitz,
                min_pivot,
                precision_bits: mantissa_bits::<T>(),
            });
        }
    }
    let prec = extended_bits(n, loss);
    let (logdet, min_pivot) = levinson_extended(n, af, prec);
    Ok(HoleResult {
        log_prob: T::lit(logdet),
        method: Method::Toeplitz,
        min_pivot: T::lit(min_pivot),
        precision_bits: prec as u32,
    })
}

fn extended_bits(n: usize, loss: f64) -> u64 {
    80 + (1.1 * loss / LN_2).ceil() as u64 + 2 * (n.max(2) as f64).log2().ceil() as u64
}

/// Levinson–Durbin for the real symmetric Toeplitz matrix with first row `t`.
pub fn levinson_logdet_sym<T: Real>(t: &[T]) -> LogDet<T> {
    let n = t.len();
    let floor = T::lit(PIVOT_FLOOR);
    if n == 0 {
        return LogDet::Ok { logdet: T::zero(), min_pivot: T::infinity() };
    }
    let mut e = t[0];
    if e.is_nan() || e <= floor {
        return LogDet::Singular { index: 0, pivot: e };
    }
    let mut logdet = e.ln();
    let mut min_pivot = e;
    let mut a: Vec<T> = Vec::with_capacity(n);
    let mut next: Vec<T> = Vec::with_capacity(n);
    for k in 1..n {
        let mut num = t[k];
        for (j, &aj) in a.iter().enumerate() {
            num = num + aj * t[k - 1 - j];
        }
        let kappa = -num / e;
        next.clear();
        let len = a.len();
        for j in 0..len {
            next.push(a[j] + kappa * a[len - 1 - j]);
        }
        std::mem::swap(&mut a, &mut next);
        a.push(kappa);
        e = e * (T::one() - kappa * kappa);
        if e.is_nan() || e <= floor {
            return LogDet::Singular { index: k, pivot: e };
        }
        min_pivot = min_pivot.min(e);
        logdet = logdet + e.ln();
    }
    LogDet::Ok { logdet, min_pivot }
}

/// Levinson–Durbin for `D_n(alpha)` in `prec`-bit binary floating point.
///
/// Returns `(ln D_n, smallest pivot as f64)`; a non-positive pivot yields
/// `-inf`.
pub(crate) fn levinson_extended(n: usize, alpha: f64, prec: u64) -> (f64, f64) {
    let ctx = Ctx { prec };
    let guard = Ctx { prec: prec + 32 + 2 * (n.max(2) as f64).log2().ceil() as u64 };
    let a = BigFloat::from_f64(alpha);
    let pi = bigfloat::pi(guard);
    let (sa, ca) = bigfloat::sin_cos(&a, guard);
    let two_c = ca.mul_i64(2, guard);
    let mut t = Vec::with_capacity(n);
    t.push(BigFloat::from_i64(1).sub(&a.div(&pi, guard), ctx));
    // Chebyshev recurrence sin((m+1)a) = 2 cos(a) sin(ma) - sin((m-1)a).
    let mut s_prev = BigFloat::zero();
    let mut s_cur = sa;
    for m in 1..n as i64 {
        t.push(s_cur.div(&pi.mul_i64(m, guard), ctx).neg());
        let s_next = two_c.mul(&s_cur, guard).sub(&s_prev, guard);
        s_prev = s_cur;
        s_cur = s_next;
    }
    let one = BigFloat::from_i64(1);
    let mut e = t[0].clone();
    let mut logdet = e.ln();
    let mut min_pivot = e.to_f64();
    let mut coef: Vec<BigFloat> = Vec::with_capacity(n);
    for k in 1..n {
        let mut num = t[k].clone();
        for (j, aj) in coef.iter().enumerate() {
            num = num.add(&aj.mul(&t[k - 1 - j], ctx), ctx);
        }
        let kappa = num.div(&e, ctx).neg();
        let len = coef.len();
        let updated: Vec<BigFloat> = (0..len).map(|j| coef[j].add(&kappa.mul(&coef[len - 1 - j], ctx), ctx)).collect();
        coef = updated;
        e = e.mul(&one.sub(&kappa.mul(&kappa, ctx), ctx), ctx);
        if e.signum() <= 0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        logdet += e.ln();
        min_pivot = min_pivot.min(e.to_f64());
        coef.push(kappa);
    }
    (logdet, min_pivot)
}

/// First column of the Hermitian Toeplitz CUE Gram matrix of `arcs`:
/// `G[j][k] = g(j - k)` with `g(d) = sum_arcs e^{i d mid} sin(d len / 2) / (pi d)`
/// and `g(-d) = conj(g(d))`.
pub fn cue_gram_column(n: usize, arcs: &ArcUnion) -> Vec<Complex64> {
    (0..n)
        .map(|d| {
            arcs.arcs()
                .iter()
                .map(|&(s, l)| {
                    if d == 0 {
                        Complex64::new(l / TAU, 0.0)
                    } else {
                        let df = d as f64;
                        Complex64::from_polar((df * 0.5 * l).sin() / (PI * df), df * (s + 0.5 * l))
                    }
                })
                .sum()
        })
        .collect()
}

/// `ln det(I_n - G)` for the CUE Gram matrix of a union of arcs.
pub fn gram_hole_cue(n: usize, arcs: &ArcUnion) -> Result<HoleResult<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if arcs.is_empty() {
        return Ok(HoleResult::certain(Method::GramCue));
    }
    let r: Vec<Complex64> = cue_gram_column(n, arcs)
        .into_iter()
        .enumerate()
        .map(|(d, g)| if d == 0 { Complex64::new(1.0, 0.0) - g } else { -g })
        .collect();
    let out = if n <= DENSE_GRAM_LIMIT {
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                dense[j * n + k] = if j >= k { r[j - k] } else { r[k - j].conj() };
            }
        }
        linalg::cholesky_logdet_herm(&mut dense, n)
    } else {
        linalg::levinson_logdet_herm(&r)
    };
    if let LogDet::Ok { logdet, min_pivot } = out {
        // First-order rounding error of ln det is about n eps Tr((I - G)^-1).
        let noise = linalg::levinson_inverse_trace_herm(&r).map(|t| n as f64 * f64::EPSILON * t);
        if noise.is_some_and(|e| e <= GRAM_EXTENDED_TOL * logdet.abs().max(1.0)) {
            return Ok(HoleResult { log_prob: logdet, method: Method::GramCue, min_pivot, precision_bits: 53 });
        }
    }
    gram_hole_cue_extended(n, arcs)
}

/// Reruns the CUE Gram determinant in extended precision, raising the
/// precision until two runs agree.
fn gram_hole_cue_extended(n: usize, arcs: &ArcUnion) -> Result<HoleResult<f64>> {
    let loss = levinson_cancellation(n, 0.5 * arcs.total_length());
    let mut prec = extended_bits(n, loss);
    let mut last_change = f64::NAN;
    for _ in 0..GRAM_EXTENDED_ATTEMPTS {
        let (coarse, _) = gram_levinson_extended(n, arcs, prec);
        let check = prec + prec / 2 + 64;
        let (fine, min_pivot) = gram_levinson_extended(n, arcs, check);
        let change = match (coarse.is_finite(), fine.is_finite()) {
            (true, true) => (coarse - fine).abs(),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        };
        if change <= GRAM_EXTENDED_TOL * fine.abs().max(1.0) {
            if !fine.is_finite() {
                return Ok(HoleResult::singular(Method::GramCue, min_pivot));
            }
            return Ok(HoleResult { log_prob: fine, method: Method::GramCue, min_pivot, precision_bits: check as u32 });
        }
        last_change = change;
        prec *= 2;
    }
    Err(Error::PrecisionExhausted { bits: prec / 2, change: last_change })
}

/// Hermitian Levinson on `I - G` for the arcs in `prec`-bit arithmetic,
/// with the entries evaluated at the same precision.
fn gram_levinson_extended(n: usize, arcs: &ArcUnion, prec: u64) -> (f64, f64) {
    let ctx = Ctx { prec };
    let guard = Ctx { prec: prec + 32 + 2 * (n.max(2) as f64).log2().ceil() as u64 };
    let pi = bigfloat::pi(guard);
    let zero = BigFloat::zero;
    let mut re: Vec<BigFloat> = (0..n).map(|_| zero()).collect();
    let mut im: Vec<BigFloat> = (0..n).map(|_| zero()).collect();
    re[0] = BigFloat::from_i64(1);
    for &(start, len) in arcs.arcs() {
        let h = BigFloat::from_f64(len).div_i64(2, guard);
        let (sh, ch) = bigfloat::sin_cos(&h, guard);
        // e^{i start} = -e^{i (start - pi)} with start in [0, 2 pi).
        let (ss, cs) = bigfloat::sin_cos(&BigFloat::from_f64(start).sub(&pi, guard), guard);
        let (ss, cs) = (ss.neg(), cs.neg());
        // z = e^{i (start + h)}, the arc midpoint.
        let zr = cs.mul(&ch, guard).sub(&ss.mul(&sh, guard), guard);
        let zi = ss.mul(&ch, guard).add(&cs.mul(&sh, guard), guard);
        re[0] = re[0].sub(&h.div(&pi, guard), guard);
        let two_c = ch.mul_i64(2, guard);
        let (mut s_prev, mut s_cur) = (zero(), sh);
        let (mut wr, mut wi) = (zr.clone(), zi.clone());
        for d in 1..n {
            // g(d) = w^d sin(d h) / (pi d)
            let amp = s_cur.div(&pi.mul_i64(d as i64, guard), guard);
            re[d] = re[d].sub(&wr.mul(&amp, guard), guard);
            im[d] = im[d].sub(&wi.mul(&amp, guard), guard);
            let s_next = two_c.mul(&s_cur, guard).sub(&s_prev, guard);
            s_prev = s_cur;
            s_cur = s_next;
            let nr = wr.mul(&zr, guard).sub(&wi.mul(&zi, guard), guard);
            wi = wr.mul(&zi, guard).add(&wi.mul(&zr, guard), guard);
            wr = nr;
        }
    }
    let one = BigFloat::from_i64(1);
    let mut e = re[0].clone();
    if e.signum() <= 0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let mut logdet = e.ln();
    let mut min_pivot = e.to_f64();
    let mut ar: Vec<BigFloat> = Vec::with_capacity(n);
    let mut ai: Vec<BigFloat> = Vec::with_capacity(n);
    for k in 1..n {
        // num = r_k + sum_j a_j r_{k-1-j}
        let (mut nr, mut ni) = (re[k].clone(), im[k].clone());
        for j in 0..ar.len() {
            let (xr, xi) = (&re[k - 1 - j], &im[k - 1 - j]);
            nr = nr.add(&ar[j].mul(xr, ctx).sub(&ai[j].mul(xi, ctx), ctx), ctx);
            ni = ni.add(&ar[j].mul(xi, ctx).add(&ai[j].mul(xr, ctx), ctx), ctx);
        }
        let kr = nr.div(&e, ctx).neg();
        let ki = ni.div(&e, ctx).neg();
        let len = ar.len();
        // a_j + kappa conj(a_{len-1-j})
        let (ur, ui): (Vec<BigFloat>, Vec<BigFloat>) = (0..len)
            .map(|j| {
                let (br, bi) = (&ar[len - 1 - j], &ai[len - 1 - j]);
                (
                    ar[j].add(&kr.mul(br, ctx).add(&ki.mul(bi, ctx), ctx), ctx),
                    ai[j].add(&ki.mul(br, ctx).sub(&kr.mul(bi, ctx), ctx), ctx),
                )
            })
            .unzip();
        ar = ur;
        ai = ui;
        let norm = kr.mul(&kr, ctx).add(&ki.mul(&ki, ctx), ctx);
        ar.push(kr);
        ai.push(ki);
        e = e.mul(&one.sub(&norm, ctx), ctx);
        if e.signum() <= 0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        logdet += e.ln();
        min_pivot = min_pivot.min(e.to_f64());
    }
    (logdet, min_pivot)
}

/// Default GUE quadrature order per interval.
pub fn default_gue_order(n: usize) -> usize {
    (2 * n + 32).max(64)
}

/// `ln det(I_n - G)` for the GUE Gram matrix of a union of intervals.
///
/// With `quad_order = None` the default order is tried and doubled (up to
/// three times) until the doubling check passes; an explicit order is
/// checked once.
pub fn gram_hole_gue(n: usize, set: &IntervalUnion, quad_order: Option<usize>) -> Result<HoleResult<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if let Some(&(lo, hi)) = set.intervals().iter().find(|&&(lo, hi)| lo < -GUE_DOMAIN || hi > GUE_DOMAIN) {
        return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] leaves [-{GUE_DOMAIN}, {GUE_DOMAIN}]")));
    }
    if set.is_empty() {
        return Ok(HoleResult::certain(Method::GramGue));
    }
    let min_order = 2 * n + 32;
    let (mut order, attempts) = match quad_order {
        Some(q) if q < min_order => {
            return Err(Error::InvalidInput(format!("quad_order {q} below 2n + 32 = {min_order}")))
        }
        Some(q) => (q, 1),
        None => (default_gue_order(n), 4),
    };
    let mut last_change = f64::NAN;
    for _ in 0..attempts {
        let coarse = gue_gram_logdet(n, set, order);
        let fine = gue_gram_logdet(n, set, 2 * order);
        let change = match (coarse.log_prob.is_finite(), fine.log_prob.is_finite()) {
            (true, true) => (coarse.log_prob - fine.log_prob).abs(),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        };
        let tol = GUE_QUAD_TOL * fine.log_prob.abs().max(1.0);
        if change <= tol {
            return Ok(fine);
        }
        // An ill-conditioned I - G moves by its rounding noise at every
        // order; min_pivot then reports the conditioning.
        let noise = gue_rounding_noise(n, set, 2 * order)?;
        if change <= tol + noise {
            return Ok(if fine.log_prob.is_finite() && noise.is_finite() {
                fine
            } else {
                HoleResult::singular(Method::GramGue, fine.min_pivot)
            });
        }
        last_change = change;
        order *= 2;
    }
    Err(Error::QuadratureTooLow { order: order / 2, change: last_change })
}

/// First-order rounding noise of `ln det(I - G)`: `sum_i 64 n eps / mu_i`
/// over the eigenvalues `mu_i` of `I - G`.
fn gue_rounding_noise(n: usize, set: &IntervalUnion, order: usize) -> Result<f64> {
    let g = gue_gram_matrix(n, set, order);
    let (vals, _) = linalg::jacobi_eigen(&g, n)?;
    let unit = 64.0 * n as f64 * f64::EPSILON;
    Ok(vals.iter().map(|&l| if l < 1.0 { unit / (1.0 - l) } else { f64::INFINITY }).sum())
}

/// The real symmetric GUE Gram matrix `G_{jk} = int_J phi_j phi_k`.
pub fn gue_gram_matrix(n: usize, set: &IntervalUnion, order: usize) -> Vec<f64> {
    let rule = GaussLegendre::cached(order);
    let rn = (n as f64).sqrt();
    let scale = rn.sqrt();
    let mut g = vec![0.0; n * n];
    for &(lo, hi) in set.intervals() {
        for (x, w) in rule.mapped(lo, hi) {
            let phi: Vec<f64> = hermite_all(n, x * rn).into_iter().map(|p| p * scale).collect();
            for j in 0..n {
                let wj = w * phi[j];
                if wj == 0.0 {
                    continue;
                }
                for k in 0..=j {
                    g[j * n + k] += wj * phi[k];
                }
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            g[k * n + j] = g[j * n + k];
        }
    }
    g
}

fn gue_gram_logdet(n: usize, set: &IntervalUnion, order: usize) -> HoleResult<f64> {
    let g = gue_gram_matrix(n, set, order);
    let mut m: Vec<f64> = g.iter().map(|v| -v).collect();
    for j in 0..n {
        m[j * n + j] += 1.0;
    }
    match linalg::cholesky_logdet(&mut m, n) {
        LogDet::Ok { logdet, min_pivot } => {
            HoleResult { log_prob: logdet, method: Method::GramGue, min_pivot, precision_bits: 53 }
        }
        LogDet::Singular { pivot, .. } => HoleResult::singular(Method::GramGue, pivot),
    }
}

/// `n^2 ln cos(alpha/2) - (1/4) ln(n sin(alpha/2)) + c0_hat`.
pub fn asymptotic_log_dn<T: Real>(n: usize, alpha: T, c0_hat: T) -> T {
    let nn = T::of_usize(n);
    let h = alpha / T::lit(2.0);
    nn * nn * h.cos().ln() - (nn * h.sin()).ln() / T::lit(4.0) + c0_hat
}

/// `ln D_n(alpha)` minus the expansion without its constant.
pub fn expansion_residual(n: usize, alpha: f64) -> Result<f64> {
    Ok(log_hole_cue(n, alpha)?.log_prob - asymptotic_log_dn(n, alpha, 0.0))
}

/// Per-alpha least-squares fit `r_n = c0 + slope / (n sin(alpha/2))`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct C0Fit {
    pub alpha: f64,
    pub c0: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct C0Estimate {
    pub c0_hat: f64,
    /// Largest pairwise disagreement between per-alpha fits.
    pub spread: f64,
    pub fits: Vec<C0Fit>,
}

/// Fits the constant of the expansion from exact determinants.
pub fn estimate_c0(alphas: &[f64], n_grid: &[usize]) -> Result<C0Estimate> {
    if alphas.is_empty() {
        return Err(Error::UnderdeterminedFit("no alpha values".into()));
    }
    if n_grid.len() < 2 {
        return Err(Error::UnderdeterminedFit(format!(
            "{} grid point(s); the two-parameter fit needs at least 2",
            n_grid.len()
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidInput("n_grid must be positive and strictly increasing".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < PI)) {
        return Err(Error::InvalidInput(format!("alpha = {a} outside (0, pi)")));
    }
    let mut fits = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let s = (0.5 * alpha).sin();
        let pts: Vec<(f64, f64)> =
            n_grid.iter().map(|&n| Ok((1.0 / (n as f64 * s), expansion_residual(n, alpha)?))).collect::<Result<_>>()?;
        let (c0, slope) = least_squares_line(&pts);
        fits.push(C0Fit { alpha, c0, slope });
    }
    let c0_hat = fits.iter().map(|f| f.c0).sum::<f64>() / fits.len() as f64;
    let lo = fits.iter().map(|f| f.c0).fold(f64::INFINITY, f64::min);
    let hi = fits.iter().map(|f| f.c0).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread > C0_SPREAD_LIMIT {
        return Err(Error::FitUnstable { spread, limit: C0_SPREAD_LIMIT });
    }
    Ok(C0Estimate { c0_hat, spread, fits })
}

/// Intercept and slope of the least-squares line through `pts`.
fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn entries() {
        assert_abs_diff_eq!(toeplitz_entry(0, PI / 2.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(toeplitz_entry(1, PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(toeplitz_entry(1, PI / 2.0), -std::f64::consts::FRAC_1_PI, epsilon = 1e-15);
        assert_abs_diff_eq!(toeplitz_entry(-1, PI / 2.0), toeplitz_entry(1, PI / 2.0), epsilon = 1e-15);
    }

    #[test]
    fn small_determinants() {
        let r = log_hole_cue(1, PI / 2.0).unwrap();
        assert_abs_diff_eq!(r.log_prob, -std::f64::consts::LN_2, epsilon = 1e-14);
        // 2x2 closed form (1 - a/pi)^2 - sin(a)^2/pi^2.
        let two = log_hole_cue(2, PI / 2.0).unwrap().log_prob;
        assert_abs_diff_eq!(two, (0.25 - 1.0 / (PI * PI)).ln(), epsilon = 1e-14);
        assert_eq!(log_hole_cue(8, 0.0).unwrap().log_prob, 0.0);
        assert_eq!(log_hole_cue(8, PI).unwrap().log_prob, f64::NEG_INFINITY);
        assert!(log_hole_cue(0, 1.0).is_err());
        assert!(log_hole_cue(3, 3.5).is_err());
    }

    #[test]
    fn f32_path_agrees_with_f64() {
        let a = log_hole_cue(6, 0.3f32).unwrap().log_prob as f64;
        let b = log_hole_cue(6, 0.3f64).unwrap().log_prob;
        assert!((a - b).abs() < 1e-5 * b.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn extended_matches_native_where_both_work() {
        for &(n, alpha) in &[(30usize, 0.2), (60, 0.1), (200, 0.02)] {
            let t: Vec<f64> = (0..n as i64).map(|m| toeplitz_entry(m, alpha)).collect();
            let LogDet::Ok { logdet, .. } = levinson_logdet_sym(&t) else { panic!() };
            let (ext, _) = levinson_extended(n, alpha, 200);
            assert!((ext - logdet).abs() < 1e-11 * logdet.abs().max(1.0), "{n} {alpha}: {ext} {logdet}");
        }
    }

    #[test]
    fn extended_precision_is_converged() {
        // 96 extra bits must not move the result.
        for &(n, alpha) in &[(100usize, 0.4), (200, 0.8), (400, 0.8)] {
            let loss = levinson_cancellation(n, alpha);
            let p = extended_bits(n, loss);
            let (a, _) = levinson_extended(n, alpha, p);
            let (b, _) = levinson_extended(n, alpha, p + 96);
            assert!((a - b).abs() < 1e-11 * a.abs(), "{n} {alpha}: {a} vs {b}");
        }
    }

    #[test]
    fn expansion_substitution() {
        let v = asymptotic_log_dn(10, PI / 2.0, 0.0);
        assert_abs_diff_eq!(v, -35.146, epsilon = 1e-3);
        let alpha = 1e-3;
        let lhs = 100.0 * (alpha / 2.0f64).cos().ln();
        let rhs = -100.0 * alpha * alpha / 8.0;
        assert!((lhs / rhs - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gram_cue_matches_toeplitz() {
        let a = gram_hole_cue(3, &ArcUnion::single(2.1, 1.0).unwrap()).unwrap();
        let b = log_hole_cue(3, 0.5).unwrap();
        assert_abs_diff_eq!(a.log_prob, b.log_prob, epsilon = 1e-10);
        assert_eq!(gram_hole_cue(4, &ArcUnion::empty()).unwrap().log_prob, 0.0);
    }

    #[test]
    fn gram_cue_levinson_path_matches_dense() {
        let arcs = ArcUnion::new([(0.3, 0.01), (2.0, 0.012)]).unwrap();
        let n = 300;
        let lev = gram_hole_cue(n, &arcs).unwrap().log_prob;
        let r: Vec<Complex64> = (0..n)
            .map(|d| {
                let g: Complex64 = arcs
                    .arcs()
                    .iter()
                    .map(|&(s, l)| {
                        if d == 0 {
                            Complex64::new(l / TAU, 0.0)
                        } else {
                            let df = d as f64;
                            (Complex64::from_polar(1.0, df * (s + l)) - Complex64::from_polar(1.0, df * s))
                                / Complex64::new(0.0, TAU * df)
                        }
                    })
                    .sum();
                Complex64::new(if d == 0 { 1.0 } else { 0.0 }, 0.0) - g
            })
            .collect();
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                dense[j * n + k] = if j >= k { r[j - k] } else { r[k - j].conj() };
            }
        }
        let LogDet::Ok { logdet, .. } = linalg::cholesky_logdet_herm(&mut dense, n) else { panic!() };
        assert!((lev - logdet).abs() < 1e-10 * logdet.abs(), "{lev} {logdet}");
    }

    #[test]
    fn arc_validation() {
        assert!(ArcUnion::new([(0.0, 1.0), (0.5, 1.0)]).is_err());
        assert!(ArcUnion::new([(6.0, 1.0), (0.5, 1.0)]).is_err());
        assert!(ArcUnion::new([(0.0, 1.0), (1.0, 1.0)]).is_ok());
        assert!(ArcUnion::new([(0.0, 7.0)]).is_err());
        let u = ArcUnion::new([(6.0, 0.5)]).unwrap();
        assert!(u.contains(0.1) && !u.contains(0.3));
    }

    #[test]
    fn gram_gue_n1_is_normal_probability() {
        // n = 1: the eigenvalue is standard normal; P(no point in [0,1]).
        let r = gram_hole_gue(1, &IntervalUnion::single(0.0, 1.0).unwrap(), None).unwrap();
        assert_abs_diff_eq!(r.log_prob, 0.658_655f64.ln(), epsilon = 2e-6);
        // The single eigenvalue is standard normal.
        let mass = 0.5 * statrs::function::erf::erf(1.0 / 2f64.sqrt());
        assert_abs_diff_eq!(r.log_prob, (1.0 - mass).ln(), epsilon = 1e-10);
        assert_eq!(gram_hole_gue(4, &IntervalUnion::empty(), None).unwrap().log_prob, 0.0);
        assert!(gram_hole_gue(4, &IntervalUnion::single(0.0, 1.0).unwrap(), Some(10)).is_err());
        assert!(gram_hole_gue(4, &IntervalUnion::single(9.0, 11.0).unwrap(), None).is_err());
    }

    #[test]
    fn gue_gram_trace_counts_mass() {
        // Tr G over the whole line is n.
        let n = 6;
        let g = gue_gram_matrix(n, &IntervalUnion::single(-5.0, 5.0).unwrap(), 200);
        let tr: f64 = (0..n).map(|j| g[j * n + j]).sum();
        assert_abs_diff_eq!(tr, n as f64, epsilon = 1e-10);
    }

    #[test]
    fn c0_needs_two_points() {
        assert!(matches!(estimate_c0(&[0.6], &[100]), Err(Error::UnderdeterminedFit(_))));
        assert!(estimate_c0(&[], &[10, 20]).is_err());
    }
}
