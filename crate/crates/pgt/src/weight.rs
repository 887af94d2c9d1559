use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use num_bigint::BigUint;
use num_traits::Zero;

/// A nonnegative arbitrary-precision edge weight, or an unbounded one.
///
/// Flow values under reweighting are products of template parameters and must
/// compare exactly, so weights are integers rather than floats. Unbounded
/// weights appear on dummy edges produced by instance merging and may also be
/// declared directly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weight {
    Finite(BigUint),
    Infinity,
}

impl Weight {
    pub fn zero() -> Self {
        Weight::Finite(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Weight::Finite(v) if v.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Weight::Finite(_))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Weight::Infinity)
    }

    pub fn as_finite(&self) -> Option<&BigUint> {
        match self {
            Weight::Finite(v) => Some(v),
            Weight::Infinity => None,
        }
    }

    /// Scales by a positive factor; unbounded weights stay unbounded.
    pub fn scale(&self, factor: &BigUint) -> Weight {
        match self {
            Weight::Finite(v) => Weight::Finite(v * factor),
            Weight::Infinity => Weight::Infinity,
        }
    }

    /// Parses the decimal form used throughout the JSON schema: a nonnegative
    /// integer in base 10, or `"inf"`.
    pub fn parse(s: &str) -> Option<Weight> {
        if s == "inf" {
            return Some(Weight::Infinity);
        }
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse::<BigUint>().ok().map(Weight::Finite)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Finite(v) => write!(f, "{v}"),
            Weight::Infinity => write!(f, "inf"),
        }
    }
}

impl From<u64> for Weight {
    fn from(v: u64) -> Self {
        Weight::Finite(BigUint::from(v))
    }
}

impl From<BigUint> for Weight {
    fn from(v: BigUint) -> Self {
        Weight::Finite(v)
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        match (self, rhs) {
            (Weight::Finite(a), Weight::Finite(b)) => Weight::Finite(a + b),
            _ => Weight::Infinity,
        }
    }
}

impl AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        *self = self.clone() + rhs;
    }
}

impl Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::zero(), Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        assert_eq!(Weight::parse("0"), Some(Weight::zero()));
        assert_eq!(Weight::parse("42"), Some(Weight::from(42)));
        assert_eq!(Weight::parse("inf"), Some(Weight::Infinity));
        assert_eq!(Weight::parse("18446744073709551616").unwrap().to_string(), "18446744073709551616");
        assert_eq!(Weight::parse("-1"), None);
        assert_eq!(Weight::parse(""), None);
        assert_eq!(Weight::parse("1.5"), None);
    }

    #[test]
    fn arithmetic_saturates_at_infinity() {
        assert_eq!(Weight::from(2) + Weight::from(3), Weight::from(5));
        assert_eq!(Weight::Infinity + Weight::from(3), Weight::Infinity);
        assert_eq!(Weight::Infinity.scale(&BigUint::from(7u32)), Weight::Infinity);
        assert_eq!(Weight::from(3).scale(&BigUint::from(7u32)), Weight::from(21));
    }
}
