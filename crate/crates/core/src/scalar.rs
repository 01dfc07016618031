//! Numeric backends shared by every solver.
//!
//! Game tables, dynamic programming and equilibrium checks are generic over
//! [`Scalar`]. `f64` is the fast default; [`Rational`] keeps the mechanism
//! module exact so that feasibility certificates can be checked without
//! tolerances.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + num_traits::Num
    + std::ops::Neg<Output = Self>
    + 'static
{
    fn from_rational(r: &Rational) -> Self;
    fn to_rational(&self) -> Rational;
    fn to_f64(&self) -> f64;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    /// Smallest integer `>= self`; `f64` snaps values within 1e-9 of an
    /// integer first so that `gamma * T` products like `0.1 * 30` behave.
    fn ceil_usize(&self) -> usize;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn is_finite_val(&self) -> bool {
        true
    }

    /// Whether arithmetic in this type is exact.
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(Rational::zero)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ceil_usize(&self) -> usize {
        let r = self.round();
        if (self - r).abs() <= 1e-9 * r.abs().max(1.0) {
            r.max(0.0) as usize
        } else {
            self.ceil().max(0.0) as usize
        }
    }

    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }

    fn is_exact() -> bool {
        false
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn ceil_usize(&self) -> usize {
        if self.is_negative() {
            return 0;
        }
        self.ceil().to_integer().to_usize().unwrap_or(usize::MAX)
    }
}

/// Parses `"3"`, `"-0.25"`, `"1/5"` or `"2.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|e| format!("{t}: {e}"))?;
        let d = BigInt::from_str(den.trim()).map_err(|e| format!("{t}: {e}"))?;
        if d.is_zero() {
            return Err(format!("{t}: zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = t[pos + 1..].parse().map_err(|e| format!("{t}: {e}"))?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("{t}: no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("{t}: not a number"));
    }
    let all = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(BigInt::from_str(if all.is_empty() { "0" } else { &all }).unwrap());
    let scale = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        for _ in 0..scale {
            value *= ten.clone();
        }
    } else {
        for _ in 0..(-scale) {
            value /= ten.clone();
        }
    }
    Ok(if neg { -value } else { value })
}

/// Exact rational from an `f64` written in its shortest round-trip decimal
/// form, so a config value of `0.2` becomes `1/5` rather than the binary
/// expansion.
pub fn rational_from_decimal_f64(v: f64) -> Result<Rational, String> {
    if !v.is_finite() {
        return Err(format!("non-finite number {v}"));
    }
    parse_rational(&format!("{v:e}"))
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}
