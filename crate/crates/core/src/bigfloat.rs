//! Minimal fixed-precision binary floating point on top of `num-bigint`.
//!
//! Only what the extended-precision Levinson path needs: the four
//! arithmetic operations, exact conversion from `f64`, `pi`, `sin`/`cos` on
//! `[0, pi]`, and a natural log returned as `f64`. Values are `m * 2^e` with
//! `|m| < 2^prec` after every operation (truncating toward negative infinity).

use std::f64::consts::LN_2;

use num_bigint::{BigInt, Sign};
use num_traits::{ToPrimitive, Zero};

#[derive(Clone, Debug)]
pub(crate) struct BigFloat {
    m: BigInt,
    e: i64,
}

/// Working precision in bits shared by every operation of one computation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Ctx {
    pub prec: u64,
}

impl BigFloat {
    pub fn zero() -> Self {
        BigFloat { m: BigInt::zero(), e: 0 }
    }

    pub fn from_i64(v: i64) -> Self {
        BigFloat { m: BigInt::from(v), e: 0 }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "BigFloat::from_f64 on non-finite input");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1i64 << 52), exp - 1075) };
        BigFloat { m: BigInt::from(sign * mant), e }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.m.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Position of the leading bit: `|self|` lies in `[2^(t-1), 2^t)`.
    fn top(&self) -> i64 {
        self.m.bits() as i64 + self.e
    }

    fn normalized(mut self, ctx: Ctx) -> Self {
        let bits = self.m.bits();
        if bits > ctx.prec {
            let sh = bits - ctx.prec;
            self.m >>= sh;
            self.e += sh as i64;
        }
        if self.m.is_zero() {
            self.e = 0;
        }
        self
    }

    pub fn neg(&self) -> Self {
        BigFloat { m: -&self.m, e: self.e }
    }

    pub fn add(&self, o: &Self, ctx: Ctx) -> Self {
        if self.is_zero() {
            return o.clone().normalized(ctx);
        }
        if o.is_zero() {
            return self.clone().normalized(ctx);
        }
        // An operand entirely below the other's precision window only moves
        // the truncated result by at most one unit in the last place.
        let gap = self.top() - o.top();
        let lim = ctx.prec as i64 + 2;
        if gap > lim {
            return self.clone().normalized(ctx);
        }
        if gap < -lim {
            return o.clone().normalized(ctx);
        }
        let (hi, lo) = if self.e >= o.e { (self, o) } else { (o, self) };
        let sh = (hi.e - lo.e) as u64;
        let m = (&hi.m << sh) + &lo.m;
        BigFloat { m, e: lo.e }.normalized(ctx)
    }

    pub fn sub(&self, o: &Self, ctx: Ctx) -> Self {
        self.add(&o.neg(), ctx)
    }

    pub fn mul(&self, o: &Self, ctx: Ctx) -> Self {
        BigFloat { m: &self.m * &o.m, e: self.e + o.e }.normalized(ctx)
    }

    pub fn mul_i64(&self, k: i64, ctx: Ctx) -> Self {
        BigFloat { m: &self.m * k, e: self.e }.normalized(ctx)
    }

    pub fn div(&self, o: &Self, ctx: Ctx) -> Self {
        assert!(!o.is_zero(), "BigFloat division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        let want = ctx.prec as i64 + 2;
        let sh = (want + o.m.bits() as i64 - self.m.bits() as i64).max(0) as u64;
        let q = (&self.m << sh) / &o.m;
        BigFloat { m: q, e: self.e - o.e - sh as i64 }.normalized(ctx)
    }

    pub fn div_i64(&self, k: i64, ctx: Ctx) -> Self {
        self.div(&Self::from_i64(k), ctx)
    }

    /// Natural log of a positive value, accurate to `f64` relative precision.
    pub fn ln(&self) -> f64 {
        assert!(self.signum() > 0, "BigFloat::ln of non-positive value");
        let bits = self.m.bits();
        let sh = bits.saturating_sub(60);
        let top = (&self.m >> sh).to_f64().expect("60-bit mantissa fits f64");
        top.ln() + (self.e + sh as i64) as f64 * LN_2
    }

    /// Nearest `f64`, flushing to zero or infinity outside its range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.m.bits();
        let sh = bits.saturating_sub(60);
        let top = (&self.m >> sh).to_f64().expect("60-bit mantissa fits f64");
        let e = self.e + sh as i64;
        if e > 2000 {
            return top.signum() * f64::INFINITY;
        }
        if e < -2200 {
            return 0.0 * top.signum();
        }
        // Two steps keep the intermediate power of two representable.
        let half = (e / 2) as i32;
        top * 2f64.powi(half) * 2f64.powi(e as i32 - half)
    }
}

fn atan_inv(k: i64, ctx: Ctx) -> BigFloat {
    // atan(1/k) = sum_j (-1)^j / ((2j+1) k^(2j+1))
    let k2 = k * k;
    let mut power = BigFloat::from_i64(1).div_i64(k, ctx);
    let mut sum = power.clone();
    let mut j = 1i64;
    let floor = -(ctx.prec as i64) - 8;
    loop {
        power = power.div_i64(k2, ctx);
        if power.is_zero() || power.top() < floor {
            break;
        }
        let term = power.div_i64(2 * j + 1, ctx);
        sum = if j % 2 == 1 { sum.sub(&term, ctx) } else { sum.add(&term, ctx) };
        j += 1;
    }
    sum
}

/// Machin's formula, evaluated with extra guard bits.
pub(crate) fn pi(ctx: Ctx) -> BigFloat {
    let g = Ctx { prec: ctx.prec + 32 };
    let a = atan_inv(5, g).mul_i64(16, g);
    let b = atan_inv(239, g).mul_i64(4, g);
    a.sub(&b, g).normalized(ctx)
}

/// `(sin x, cos x)` by Taylor series; intended for `|x| <= pi`.
pub(crate) fn sin_cos(x: &BigFloat, ctx: Ctx) -> (BigFloat, BigFloat) {
    let g = Ctx { prec: ctx.prec + 32 };
    let x2 = x.mul(x, g);
    let floor = -(g.prec as i64) - 8;
    let mut s = x.clone();
    let mut c = BigFloat::from_i64(1);
    let mut term = x.clone();
    let mut k = 1i64;
    let mut ct = BigFloat::from_i64(1);
    loop {
        ct = ct.mul(&x2, g).div_i64(k * (k + 1), g).neg();
        term = term.mul(&x2, g).div_i64((k + 1) * (k + 2), g).neg();
        c = c.add(&ct, g);
        s = s.add(&term, g);
        let done = (ct.is_zero() || ct.top() < floor) && (term.is_zero() || term.top() < floor);
        if done {
            break;
        }
        k += 2;
    }
    (s.normalized(ctx), c.normalized(ctx))
}
