//! Number types the recurrence can run in: double-double for the common
//! case, and a binary float of chosen precision for points where even that
//! is swamped by cancellation.

use astro_float::{BigFloat, RoundingMode, Sign as BfSign};

use crate::dd::{Dd, DD_EPS};

/// Precision ceiling for [`Mp`], in bits.
pub const MAX_BITS: usize = 8192;

const RM: RoundingMode = RoundingMode::ToEven;

/// The arithmetic the forward recurrence needs. Values built from one
/// prototype share its precision.
pub(crate) trait Real: Clone {
    /// Unit roundoff of one operation.
    fn eps(&self) -> f64;
    fn lift(&self, x: f64) -> Self;
    /// `a + b` with a single rounding.
    fn lift_sum(&self, a: f64, b: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul_f64(&self, x: f64) -> Self;
    fn div_f64(&self, x: f64) -> Self;
    /// Multiplication by a power of two.
    fn scale_pow2(&self, f: f64) -> Self;
    /// `|x|` rounded to f64; may saturate.
    fn abs_f64(&self) -> f64;
    fn ln_abs(&self) -> f64;
    fn signum(&self) -> i8;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool;
}

impl Real for Dd {
    fn eps(&self) -> f64 {
        DD_EPS
    }
    fn lift(&self, x: f64) -> Self {
        Dd::from_f64(x)
    }
    fn lift_sum(&self, a: f64, b: f64) -> Self {
        Dd::sum_f64(a, b)
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn div(&self, o: &Self) -> Self {
        *self / *o
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn mul_f64(&self, x: f64) -> Self {
        Dd::mul_f64(*self, x)
    }
    fn div_f64(&self, x: f64) -> Self {
        Dd::div_f64(*self, x)
    }
    fn scale_pow2(&self, f: f64) -> Self {
        Dd::scale_pow2(*self, f)
    }
    fn abs_f64(&self) -> f64 {
        self.hi.abs()
    }
    fn ln_abs(&self) -> f64 {
        Dd::ln_abs(*self)
    }
    fn signum(&self) -> i8 {
        Dd::signum(*self)
    }
    fn is_zero(&self) -> bool {
        Dd::is_zero(*self)
    }
    fn is_finite(&self) -> bool {
        Dd::is_finite(*self)
    }
}

/// Binary floating point with `bits` of mantissa.
#[derive(Debug, Clone)]
pub struct Mp {
    v: BigFloat,
    bits: usize,
}

impl Mp {
    pub fn zero(bits: usize) -> Mp {
        Mp {
            v: BigFloat::from_f64(0.0, bits),
            bits,
        }
    }

    fn wrap(&self, v: BigFloat) -> Mp {
        Mp { v, bits: self.bits }
    }

    /// `(m, e)` with `|x| = m 2^e`, `m` in `[0.5, 1)`; `None` for zero.
    fn frexp(&self) -> Option<(f64, i64)> {
        if self.v.is_zero() {
            return None;
        }
        let top = *self.v.mantissa_digits()?.last()?;
        let e = self.v.exponent()? as i64;
        Some((top as f64 / 18446744073709551616.0, e))
    }
}

impl Real for Mp {
    fn eps(&self) -> f64 {
        2f64.powi(1 - self.bits as i32)
    }
    fn lift(&self, x: f64) -> Self {
        self.wrap(BigFloat::from_f64(x, self.bits.max(64)))
    }
    fn lift_sum(&self, a: f64, b: f64) -> Self {
        self.lift(a).add(&self.lift(b))
    }
    fn add(&self, o: &Self) -> Self {
        self.wrap(self.v.add(&o.v, self.bits, RM))
    }
    fn sub(&self, o: &Self) -> Self {
        self.wrap(self.v.sub(&o.v, self.bits, RM))
    }
    fn mul(&self, o: &Self) -> Self {
        self.wrap(self.v.mul(&o.v, self.bits, RM))
    }
    fn div(&self, o: &Self) -> Self {
        self.wrap(self.v.div(&o.v, self.bits, RM))
    }
    fn neg(&self) -> Self {
        self.wrap(self.v.neg())
    }
    fn mul_f64(&self, x: f64) -> Self {
        self.wrap(self.v.mul(&BigFloat::from_f64(x, 64), self.bits, RM))
    }
    fn div_f64(&self, x: f64) -> Self {
        self.wrap(self.v.div(&BigFloat::from_f64(x, 64), self.bits, RM))
    }
    fn scale_pow2(&self, f: f64) -> Self {
        self.mul_f64(f)
    }
    fn abs_f64(&self) -> f64 {
        match self.frexp() {
            None => 0.0,
            Some((m, e)) => m * 2f64.powi(e.clamp(-1100, 1100) as i32),
        }
    }
    fn ln_abs(&self) -> f64 {
        match self.frexp() {
            None => f64::NEG_INFINITY,
            Some((m, e)) => m.ln() + e as f64 * std::f64::consts::LN_2,
        }
    }
    fn signum(&self) -> i8 {
        if self.v.is_zero() {
            return 0;
        }
        match self.v.sign() {
            Some(BfSign::Neg) => -1,
            _ => 1,
        }
    }
    fn is_zero(&self) -> bool {
        self.v.is_zero()
    }
    fn is_finite(&self) -> bool {
        !self.v.is_nan() && !self.v.is_inf()
    }
}
