//! Scalar abstraction shared by every probability, reward, and value.

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::{Debug, Display};

/// Field-like scalar used for probabilities, rewards, and expected values.
///
/// Implemented by exact rationals (`Rational`, `num_rational::Ratio<i128>`)
/// and by `f32`/`f64`. Division is assumed to be exact field division, so
/// plain integer types do not belong here. Identity checks in this crate
/// compare scalars with `==`; instantiate them with an exact rational type
/// whenever the result is meant to be a verdict rather than an estimate.
pub trait Scalar:
    Num
    + Signed
    + PartialOrd
    + Clone
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + PartialOrd
        + Clone
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// `n` as a scalar. Panics only if the scalar cannot represent the count,
/// which no supported instantiation hits for realistic carrier sizes.
pub fn from_count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("carrier size representable in scalar")
}

/// `n/d` as a scalar. Panics if `d` is zero.
pub fn from_ratio<S: Scalar>(n: i64, d: i64) -> S {
    assert!(d != 0, "zero denominator");
    S::from_i64(n).expect("numerator representable") / S::from_i64(d).expect("denominator representable")
}

/// `base^exp` by repeated multiplication.
pub fn pow<S: Scalar>(base: &S, exp: usize) -> S {
    let mut out = S::one();
    for _ in 0..exp {
        out = out * base.clone();
    }
    out
}

/// Best-effort decimal rendering, used only for report readability.
pub fn to_decimal<S: Scalar>(value: &S) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn ratio_and_pow_are_exact() {
        let half: Rational = from_ratio(1, 2);
        assert_eq!(pow(&half, 3), from_ratio(1, 8));
        assert_eq!(from_count::<Rational>(4), from_ratio(4, 1));
    }

    #[test]
    fn works_for_floats_too() {
        let x: f64 = from_ratio(3, 4);
        assert_eq!(x, 0.75);
        assert_eq!(pow(&x, 2), 0.5625);
    }
}
