//! Reals extended with negative infinity.
//!
//! An event observed at a time where the hazard vanishes contributes
//! `log 0 = -inf` to the objective. Keeping that as a value (instead of an
//! error) lets optimizers rank such candidates below every finite one.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    NegInfinity,
}

impl ExtendedValue {
    pub const ZERO: ExtendedValue = ExtendedValue::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    /// Collapses to `f64`, mapping the infinite state to `f64::NEG_INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedValue::Finite(x) => x,
            ExtendedValue::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(x) => Some(x),
            ExtendedValue::NegInfinity => None,
        }
    }
}

impl From<f64> for ExtendedValue {
    /// `-inf` maps to [`ExtendedValue::NegInfinity`]. Other non-finite inputs
    /// are a caller bug.
    fn from(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            ExtendedValue::NegInfinity
        } else {
            debug_assert!(x.is_finite(), "ExtendedValue from non-finite {x}");
            ExtendedValue::Finite(x)
        }
    }
}

impl Add for ExtendedValue {
    type Output = ExtendedValue;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => ExtendedValue::Finite(a + b),
            _ => ExtendedValue::NegInfinity,
        }
    }
}

impl Add<f64> for ExtendedValue {
    type Output = ExtendedValue;

    fn add(self, rhs: f64) -> Self {
        self + ExtendedValue::Finite(rhs)
    }
}

/// Scaling by a positive factor; `-inf` stays `-inf`.
impl Mul<f64> for ExtendedValue {
    type Output = ExtendedValue;

    fn mul(self, rhs: f64) -> Self {
        debug_assert!(rhs > 0.0);
        match self {
            ExtendedValue::Finite(a) => ExtendedValue::Finite(a * rhs),
            ExtendedValue::NegInfinity => ExtendedValue::NegInfinity,
        }
    }
}

impl Sum for ExtendedValue {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExtendedValue::ZERO, Add::add)
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => a.partial_cmp(b),
            (ExtendedValue::NegInfinity, ExtendedValue::NegInfinity) => Some(Ordering::Equal),
            (ExtendedValue::NegInfinity, _) => Some(Ordering::Less),
            (_, ExtendedValue::NegInfinity) => Some(Ordering::Greater),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(x) => write!(f, "{x}"),
            ExtendedValue::NegInfinity => f.write_str("-inf"),
        }
    }
}
