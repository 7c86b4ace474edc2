//! Scalar backends for polar arithmetic.
//!
//! Everything that touches the frame angles of a long product is generic over
//! [`Real`]. Two backends are provided: plain `f64` and [`DoubleDouble`], an
//! unevaluated sum of two doubles carrying roughly 106 bits of mantissa. The
//! extended backend matters when frame-angle increments fall below one ulp of
//! the accumulated angle.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::{BigInt, BigUint};
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Working precision selector used by configuration and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::Double => 53,
            Precision::Extended => 106,
        }
    }

    pub fn from_bits(bits: u32) -> Self {
        if bits > 53 {
            Precision::Extended
        } else {
            Precision::Double
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Double => f.write_str("double"),
            Precision::Extended => f.write_str("extended"),
        }
    }
}

pub trait Real:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const PRECISION: Precision;
    /// Unit roundoff of the backend.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// `num / den` rounded to the backend's precision.
    fn from_ratio(num: &BigUint, den: &BigUint) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn pi() -> Self;
    fn frac_pi_2() -> Self;

    fn sin_cos(self) -> (Self, Self);
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn atan2(self, x: Self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn hypot(self, other: Self) -> Self;

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
    fn is_zero(self) -> bool {
        self.to_f64() == 0.0
    }
    fn mul_f64(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;
    const EPSILON: f64 = f64::EPSILON / 2.0;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_ratio(num: &BigUint, den: &BigUint) -> Self {
        DoubleDouble::from_ratio(num, den).hi
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn frac_pi_2() -> Self {
        std::f64::consts::FRAC_PI_2
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn hypot(self, other: Self) -> Self {
        f64::hypot(self, other)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const DD_PI: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};
const DD_FRAC_PI_2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::FRAC_PI_2,
    lo: 6.123_233_995_736_766e-17,
};
const DD_LN_2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        DoubleDouble { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return DoubleDouble { hi, lo: 0.0 };
        }
        let (h, l) = quick_two_sum(hi, lo);
        DoubleDouble { hi: h, lo: l }
    }

    fn ldexp(self, k: i32) -> Self {
        // split the scaling so that 2^k itself never overflows
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let f = 2f64.powi(step);
            out = DoubleDouble {
                hi: out.hi * f,
                lo: out.lo * f,
            };
            k -= step;
        }
        out
    }

    fn square(self) -> Self {
        self * self
    }

    pub fn from_ratio(num: &BigUint, den: &BigUint) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return DoubleDouble::default();
        }
        // q = floor(num * 2^shift / den) carries ~120 significant bits
        let shift = 121 + den.bits() as i64 - num.bits() as i64;
        let q = if shift >= 0 {
            (num << shift as u64) / den
        } else {
            num / (den << (-shift) as u64)
        };
        let hi = q.to_f64().unwrap_or(f64::INFINITY);
        let hi_int = BigUint::from_f64(hi).unwrap_or_default();
        let rem = BigInt::from(q) - BigInt::from(hi_int);
        let lo = rem.to_f64().unwrap_or(0.0);
        let scale = -(shift as i32);
        DoubleDouble::renorm(hi, lo).ldexp(scale)
    }

    fn exp_impl(self) -> Self {
        if self.hi < -745.5 {
            return DoubleDouble::default();
        }
        if self.hi > 709.8 {
            return DoubleDouble {
                hi: f64::INFINITY,
                lo: 0.0,
            };
        }
        let k = (self.hi / DD_LN_2.hi).round();
        let r = self - DD_LN_2 * DoubleDouble::from_f64(k);
        // r / 2^10, series for exp(r) - 1, then undo by repeated squaring
        let r = r.ldexp(-10);
        let mut term = r;
        let mut sum = r;
        let mut n = 1.0;
        loop {
            n += 1.0;
            term = term * r / DoubleDouble::from_f64(n);
            sum += term;
            if term.hi.abs() < 1e-36 * sum.hi.abs().max(1e-300) || n > 40.0 {
                break;
            }
        }
        // (1 + p)^2 - 1 = 2p + p^2
        for _ in 0..10 {
            sum = sum.mul_f64(2.0) + sum.square();
        }
        (sum + DoubleDouble::from_f64(1.0)).ldexp(k as i32)
    }

    fn sin_cos_reduced(r: Self) -> (Self, Self) {
        // |r| <= pi/4
        let r2 = r * r;
        let mut s_term = r;
        let mut s_sum = r;
        let mut c_term = DoubleDouble::from_f64(1.0);
        let mut c_sum = c_term;
        let mut k = 1.0;
        for _ in 0..30 {
            c_term = -(c_term * r2) / DoubleDouble::from_f64(k * (k + 1.0));
            c_sum += c_term;
            s_term = -(s_term * r2) / DoubleDouble::from_f64((k + 1.0) * (k + 2.0));
            s_sum += s_term;
            k += 2.0;
            if s_term.hi.abs() < 1e-36 && c_term.hi.abs() < 1e-36 {
                break;
            }
        }
        (s_sum, c_sum)
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hi)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        if !s.is_finite() {
            return DoubleDouble { hi: s, lo: 0.0 };
        }
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        DoubleDouble::renorm(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        if !p.is_finite() {
            return DoubleDouble { hi: p, lo: 0.0 };
        }
        DoubleDouble::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        if !q1.is_finite() || q1 == 0.0 {
            return DoubleDouble { hi: q1, lo: 0.0 };
        }
        let r = self - o * DoubleDouble::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * DoubleDouble::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (h, l) = quick_two_sum(q1, q2);
        DoubleDouble::renorm(h, l) + DoubleDouble::from_f64(q3)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Real for DoubleDouble {
    const PRECISION: Precision = Precision::Extended;
    const EPSILON: f64 = 1.232_595_164_407_831e-32;

    fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn from_ratio(num: &BigUint, den: &BigUint) -> Self {
        DoubleDouble::from_ratio(num, den)
    }
    fn pi() -> Self {
        DD_PI
    }
    fn frac_pi_2() -> Self {
        DD_FRAC_PI_2
    }
    fn mul_f64(self, k: f64) -> Self {
        let (p, e) = two_prod(self.hi, k);
        DoubleDouble::renorm(p, e + self.lo * k)
    }

    fn sin_cos(self) -> (Self, Self) {
        if !self.hi.is_finite() {
            return (
                DoubleDouble::from_f64(f64::NAN),
                DoubleDouble::from_f64(f64::NAN),
            );
        }
        let k = (self.hi / DD_FRAC_PI_2.hi).round();
        let r = self - DD_FRAC_PI_2 * DoubleDouble::from_f64(k);
        let (s, c) = DoubleDouble::sin_cos_reduced(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    fn atan2(self, x: Self) -> Self {
        if self.hi == 0.0 && x.hi == 0.0 {
            return DoubleDouble::from_f64(f64::atan2(self.hi, x.hi));
        }
        let t0 = DoubleDouble::from_f64(f64::atan2(self.hi, x.hi));
        let (s, c) = t0.sin_cos();
        // Newton step on y cos t - x sin t = 0
        let num = self * c - x * s;
        let den = x * c + self * s;
        t0 + num / den
    }

    fn exp(self) -> Self {
        self.exp_impl()
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(if self.hi == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            });
        }
        if !self.hi.is_finite() {
            return self;
        }
        // exp would overflow/underflow for extreme arguments; split off a power of two
        let e = self.hi.log2().floor() as i32;
        let m = self.ldexp(-e);
        let mut y = DoubleDouble::from_f64(m.hi.ln());
        for _ in 0..2 {
            y = y + m * (-y).exp_impl() - DoubleDouble::from_f64(1.0);
        }
        y + DD_LN_2.mul_f64(e as f64)
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(self.hi.sqrt());
        }
        let y = DoubleDouble::from_f64(self.hi.sqrt());
        y + (self - y * y) / y.mul_f64(2.0)
    }

    fn hypot(self, other: Self) -> Self {
        let a = self.abs();
        let b = other.abs();
        let m = if a > b { a } else { b };
        if m.hi == 0.0 {
            return DoubleDouble::default();
        }
        let e = m.hi.log2().floor() as i32;
        let a = a.ldexp(-e);
        let b = b.ldexp(-e);
        (a * a + b * b).sqrt().ldexp(e)
    }
}
