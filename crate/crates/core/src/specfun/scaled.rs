//! Sign / log-magnitude representation for quantities whose dynamic range
//! exceeds `f64`.

use std::f64::consts::LN_2;
use std::ops::{Div, Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real number `mantissa * 2^exponent` with `|mantissa|` in `[0.5, 1)`.
///
/// The sign is `{-1, 0, +1}` and the magnitude is exposed as a natural log;
/// zero has `log_magnitude() == -inf`. Conversion from and back to `f64` is
/// exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    mantissa: f64,
    exponent: i64,
}

fn frexp(v: f64) -> (f64, i64) {
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    if exp_bits == 0 {
        let (m, e) = frexp(v * 2f64.powi(54));
        return (m, e - 54);
    }
    let m = f64::from_bits((bits & !(0x7ff_u64 << 52)) | (1022_u64 << 52));
    (m, exp_bits - 1022)
}

fn ldexp(mut v: f64, mut e: i64) -> f64 {
    if e > 1100 {
        return v * f64::INFINITY;
    }
    if e < -1200 {
        return v * 0.0;
    }
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e as i32)
}

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        exponent: 0,
    };

    pub const ONE: ScaledValue = ScaledValue {
        mantissa: 0.5,
        exponent: 1,
    };

    fn normalized(mantissa: f64, exponent: i64) -> Self {
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        debug_assert!(mantissa.is_finite());
        let (m, e) = frexp(mantissa);
        ScaledValue {
            mantissa: m,
            exponent: exponent + e,
        }
    }

    /// Builds a value from a sign and a natural-log magnitude.
    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        debug_assert!(log_magnitude.is_finite());
        let e = (log_magnitude / LN_2).floor();
        let r = log_magnitude - e * LN_2;
        Self::normalized(f64::from(sign.signum()) * r.exp(), e as i64)
    }

    /// Positive value with the given log-magnitude.
    pub fn from_log(log_magnitude: f64) -> Self {
        Self::new(1, log_magnitude)
    }

    pub fn from_f64(v: f64) -> Self {
        Self::normalized(v, 0)
    }

    pub fn sign(&self) -> i8 {
        if self.mantissa > 0.0 {
            1
        } else if self.mantissa < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn log_magnitude(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.exponent as f64 * LN_2
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// Plain value; saturates to `+-inf` or `0` outside the `f64` range.
    pub fn to_f64(&self) -> f64 {
        ldexp(self.mantissa, self.exponent)
    }

    /// Plain value, or [`Error::Overflow`] when it does not fit in an `f64`.
    pub fn try_to_f64(&self) -> Result<f64> {
        let v = self.to_f64();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(self.log_magnitude()))
        }
    }

    /// `self * exp(-log_scale)` as a plain number.
    pub fn to_f64_scaled(&self, log_scale: f64) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.signum() * (self.log_magnitude() - log_scale).exp()
        }
    }

    pub fn abs(&self) -> Self {
        ScaledValue {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Multiplies by a plain `f64` factor.
    pub fn scale(&self, factor: f64) -> Self {
        Self::normalized(self.mantissa * factor, self.exponent)
    }

    /// Sum of two scaled values.
    pub fn add(&self, other: &ScaledValue) -> ScaledValue {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.exponent >= other.exponent {
            (self, other)
        } else {
            (other, self)
        };
        let shift = big.exponent - small.exponent;
        if shift > 60 {
            return *big;
        }
        Self::normalized(big.mantissa + ldexp(small.mantissa, -shift), big.exponent)
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        Self::normalized(self.mantissa * rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Div for ScaledValue {
    type Output = ScaledValue;
    fn div(self, rhs: ScaledValue) -> ScaledValue {
        assert!(!rhs.is_zero(), "division by zero ScaledValue");
        Self::normalized(self.mantissa / rhs.mantissa, self.exponent - rhs.exponent)
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> ScaledValue {
        ScaledValue {
            mantissa: -self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl From<f64> for ScaledValue {
    fn from(v: f64) -> Self {
        ScaledValue::from_f64(v)
    }
}
