//! Exact rational helpers shared by every module.
//!
//! Values and probabilities in the core model are arbitrary-precision
//! rationals. Floating point only shows up in Monte-Carlo estimates, the
//! closed-form exponential sums of the randomized threshold policy, and
//! report rendering.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// `e / (e - 1)`, the competitive ratio of the randomized threshold policy.
pub const E_OVER_E_MINUS_ONE: f64 = std::f64::consts::E / (std::f64::consts::E - 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Invalid(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num / den`, reduced. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"` or a bare integer `"p"`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| ParseRationalError::Invalid(text.to_string()))?;
    let den: BigInt = den.parse().map_err(|_| ParseRationalError::Invalid(text.to_string()))?;
    if den.is_zero() {
        return Err(ParseRationalError::ZeroDenominator(text.to_string()));
    }
    Ok(Rational::new(num, den))
}

/// Always renders as `"p/q"`, including integers (`"5/1"`).
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| if value.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact dyadic rational equal to a finite float.
pub fn from_f64(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

/// `H_n = 1 + 1/2 + ... + 1/n`; `H_0 = 0`.
pub fn harmonic(n: u64) -> Rational {
    (1..=n).fold(Rational::zero(), |acc, k| acc + Rational::new(BigInt::one(), BigInt::from(k)))
}

pub fn min_rational<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if b < a {
        b
    } else {
        a
    }
}

/// Rational approximation of `e^n` rounded to six decimal places.
///
/// The relative error is at most `5e-7 / e^n`, comfortably below `1e-6`.
pub fn exp_approx(n: u32) -> Rational {
    let scaled = (f64::from(n).exp() * 1e6).round();
    let num = BigInt::from(scaled as i128);
    Rational::new(num, BigInt::from(1_000_000))
}
