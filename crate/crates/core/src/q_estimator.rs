//! The running estimator `Q_p(t) = ∫_0^t 1 / v_p(τ) dτ` of an observed path,
//! where `v_p` is the step function `v_p(t) = v_i` on `[i, i+1)`.
//!
//! `Q` is piecewise linear with slope `1/v_i` on segment `i`. A zero value
//! makes the slope infinite: `Q` jumps to `+∞` right after `t = i`, so every
//! threshold still above `Q(i)` is crossed at `t = i`.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QError {
    #[error("observed value {0} is negative")]
    NegativeValue(Rational),
    #[error("Q^-1({0}) is not determined by the observed prefix yet")]
    NotYetDetermined(Rational),
    #[error("Q^-1({0}) falls inside a zero-value segment where Q is not invertible")]
    ZeroSegment(Rational),
    #[error("Q^-1 is undefined for negative argument {0}")]
    NegativeArgument(Rational),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QValue {
    Finite(Rational),
    Infinite,
}

/// Snapshot of `Q_p` on `[0, k]` after observing `k` values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QFunction {
    values: Vec<Rational>,
    /// `Q(0), Q(1), ...` up to the first zero-value segment (inclusive of its
    /// left endpoint).
    breakpoints: Vec<Rational>,
}

impl QFunction {
    pub fn new() -> Self {
        Self { values: Vec::new(), breakpoints: vec![Rational::zero()] }
    }

    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Result<Self, QError> {
        let mut q = Self::new();
        for v in values {
            q.push(v.clone())?;
        }
        Ok(q)
    }

    /// Appends the segment `[i, i+1)` with value `v_i`.
    pub fn push(&mut self, value: Rational) -> Result<(), QError> {
        if value.is_negative() {
            return Err(QError::NegativeValue(value));
        }
        if self.first_zero().is_none() && !value.is_zero() {
            let last = self.breakpoints.last().expect("Q(0) is always present");
            let next = last + value.recip();
            self.breakpoints.push(next);
        }
        self.values.push(value);
        Ok(())
    }

    /// Snapshot covering one more segment; `self` is left untouched.
    pub fn extend(&self, value: Rational) -> Result<Self, QError> {
        let mut next = self.clone();
        next.push(value)?;
        Ok(next)
    }

    /// Number of observed values `k`; `Q` is known on `[0, k]`.
    pub fn covered(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// Index of the first zero-value segment, if any.
    pub fn first_zero(&self) -> Option<usize> {
        self.values.iter().position(Zero::is_zero)
    }

    /// `Q(i)` at an integer point `i <= covered()`.
    pub fn at_index(&self, i: usize) -> QValue {
        assert!(i <= self.covered(), "Q({i}) is beyond the observed prefix");
        match self.breakpoints.get(i) {
            Some(q) => QValue::Finite(q.clone()),
            None => QValue::Infinite,
        }
    }

    /// `Q(t)` for rational `0 <= t <= covered()`.
    pub fn eval(&self, t: &Rational) -> QValue {
        assert!(!t.is_negative() && *t <= Rational::from_integer(BigInt::from(self.covered())));
        let i = t.floor().to_integer();
        let i: usize = i.try_into().expect("index fits in usize");
        let frac = t - Rational::from_integer(BigInt::from(i));
        if frac.is_zero() {
            return self.at_index(i);
        }
        match (self.breakpoints.get(i), self.values.get(i)) {
            (Some(q), Some(v)) if !v.is_zero() => QValue::Finite(q + frac / v),
            _ => QValue::Infinite,
        }
    }

    /// Smallest `t` in the covered range with `Q(t) >= rho`; for a zero-value
    /// segment starting at `i` this is `t = i`. `None` if `Q` has not reached
    /// `rho` on `[0, covered()]`.
    pub fn crossing_time(&self, rho: &Rational) -> Option<Rational> {
        if !rho.is_positive() {
            return Some(Rational::zero());
        }
        for (i, v) in self.values.iter().enumerate() {
            let start = &self.breakpoints[i];
            let at = Rational::from_integer(BigInt::from(i));
            if v.is_zero() {
                return Some(at);
            }
            let end = &self.breakpoints[i + 1];
            if rho <= end {
                return Some(at + (rho - start) * v);
            }
        }
        None
    }

    /// `Q^{-1}(s)`: the exact `t` with `Q(t) = s`.
    pub fn inverse(&self, s: &Rational) -> Result<Rational, QError> {
        if s.is_negative() {
            return Err(QError::NegativeArgument(s.clone()));
        }
        if let Some(z) = self.first_zero() {
            if *s > self.breakpoints[z] {
                return Err(QError::ZeroSegment(s.clone()));
            }
        }
        self.crossing_time(s).ok_or_else(|| QError::NotYetDetermined(s.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn q(values: &[i64]) -> QFunction {
        QFunction::from_values(&values.iter().map(|&v| int(v)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn starts_at_zero() {
        let empty = QFunction::new();
        assert_eq!(empty.at_index(0), QValue::Finite(int(0)));
        assert_eq!(empty.crossing_time(&int(0)), Some(int(0)));
        assert_eq!(empty.crossing_time(&ratio(1, 2)), None);
    }

    #[test]
    fn extend_adds_reciprocals() {
        assert_eq!(q(&[2]).at_index(1), QValue::Finite(ratio(1, 2)));
        assert_eq!(q(&[2, 4]).at_index(2), QValue::Finite(ratio(3, 4)));
        assert_eq!(q(&[2, 4]).eval(&ratio(3, 2)), QValue::Finite(ratio(5, 8)));
    }

    #[test]
    fn extend_leaves_snapshot_untouched() {
        let base = q(&[2]);
        let next = base.extend(int(4)).unwrap();
        assert_eq!(base.covered(), 1);
        assert_eq!(next.covered(), 2);
        assert!(matches!(base.extend(int(-1)), Err(QError::NegativeValue(_))));
    }

    #[test]
    fn zero_value_crosses_immediately() {
        let path = q(&[2, 0]);
        assert_eq!(path.crossing_time(&ratio(3, 4)), Some(int(1)));
        assert_eq!(path.crossing_time(&int(1)), Some(int(1)));
        assert_eq!(path.crossing_time(&ratio(1, 2)), Some(int(1)));
        assert_eq!(path.crossing_time(&ratio(1, 4)), Some(ratio(1, 2)));
        assert_eq!(path.at_index(2), QValue::Infinite);
        assert_eq!(path.eval(&ratio(3, 2)), QValue::Infinite);
    }

    #[test]
    fn crossing_times() {
        assert_eq!(q(&[1]).crossing_time(&int(1)), Some(int(1)));
        assert_eq!(q(&[2, 4]).crossing_time(&ratio(3, 4)), Some(int(2)));
        assert_eq!(q(&[2, 4]).crossing_time(&ratio(5, 8)), Some(ratio(3, 2)));
        assert_eq!(q(&[2, 4]).crossing_time(&int(1)), None);
    }

    #[test]
    fn inverse_examples() {
        let path = q(&[2, 4]);
        assert_eq!(path.inverse(&int(0)).unwrap(), int(0));
        assert_eq!(path.inverse(&ratio(3, 4)).unwrap(), int(2));
        let lhs = path.inverse(&ratio(3, 4)).unwrap() - path.inverse(&ratio(1, 4)).unwrap();
        // ∫ v_p(Q^-1(w)) dw over [1/4, 3/4]: value 2 on [1/4, 1/2], value 4 on [1/2, 3/4]
        let rhs = int(2) * (ratio(1, 2) - ratio(1, 4)) + int(4) * (ratio(3, 4) - ratio(1, 2));
        assert_eq!(lhs, ratio(3, 2));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverse_errors() {
        assert!(matches!(q(&[2, 4]).inverse(&int(1)), Err(QError::NotYetDetermined(_))));
        assert!(matches!(q(&[2, 0, 3]).inverse(&int(1)), Err(QError::ZeroSegment(_))));
        assert!(matches!(q(&[2]).inverse(&int(-1)), Err(QError::NegativeArgument(_))));
    }
}
