//! Validated finite probability distributions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A probability distribution over an indexed finite carrier.
///
/// The carrier is positional: index `i` refers to the `i`-th symbol of
/// whatever list the distribution is declared over (actions in declaration
/// order, or percepts in canonical enumeration order). Masses are exact
/// scalars, validated to be nonnegative and to sum to exactly 1.
#[derive(Clone, PartialEq, Debug)]
pub struct Dist<S> {
    mass: Vec<S>,
}

impl<S: Scalar> Dist<S> {
    /// Validates masses: every entry nonnegative, total exactly 1.
    pub fn new(mass: Vec<S>) -> Result<Self> {
        for (index, m) in mass.iter().enumerate() {
            if *m < S::zero() {
                return Err(Error::NegativeMass {
                    index,
                    mass: m.to_string(),
                });
            }
        }
        let sum = mass.iter().fold(S::zero(), |a, b| a + b.clone());
        if !sum.is_one() {
            return Err(Error::NotNormalized {
                sum: sum.to_string(),
            });
        }
        Ok(Dist { mass })
    }

    /// Uniform distribution over a carrier of size `n` (n >= 1).
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "empty carrier");
        let share = S::one() / crate::scalar::from_count::<S>(n);
        Dist {
            mass: vec![share; n],
        }
    }

    /// Point mass at `index` over a carrier of size `n`.
    pub fn point(n: usize, index: usize) -> Self {
        assert!(index < n, "point mass outside carrier");
        let mut mass = vec![S::zero(); n];
        mass[index] = S::one();
        Dist { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self, index: usize) -> &S {
        &self.mass[index]
    }

    pub fn masses(&self) -> &[S] {
        &self.mass
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, _)| i)
    }

    /// Trusted constructor for internal callers that already guarantee the
    /// invariants, and for the defect catalogue that deliberately breaks them.
    pub(crate) fn from_raw(mass: Vec<S>) -> Self {
        Dist { mass }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, Rational};
    use proptest::prelude::*;

    #[test]
    fn accepts_exact_unit_mass() {
        let d = Dist::new(vec![rat(1, 3), rat(2, 3)]).unwrap();
        assert_eq!(d.mass(0), &rat(1, 3));
        assert_eq!(d.support().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn rejects_short_mass() {
        let err = Dist::new(vec![rat(1, 2), rat(1, 3)]).unwrap_err();
        assert_eq!(
            err,
            crate::Error::NotNormalized {
                sum: "5/6".to_string()
            }
        );
    }

    #[test]
    fn rejects_negative_mass_before_normalization() {
        let err = Dist::new(vec![rat(3, 2), rat(-1, 2)]).unwrap_err();
        assert_eq!(
            err,
            crate::Error::NegativeMass {
                index: 1,
                mass: "-1/2".to_string()
            }
        );
    }

    #[test]
    fn uniform_and_point_are_valid() {
        let u: Dist<Rational> = Dist::uniform(4);
        assert_eq!(u.mass(3), &rat(1, 4));
        let p: Dist<Rational> = Dist::point(3, 1);
        assert_eq!(p.support().collect::<Vec<_>>(), vec![1]);
        assert!(Dist::new(u.masses().to_vec()).is_ok());
        assert!(Dist::new(p.masses().to_vec()).is_ok());
    }

    proptest! {
        #[test]
        fn validation_accepts_exactly_the_normalized_vectors(
            nums in proptest::collection::vec(0i64..5, 1..6)
        ) {
            let total: i64 = nums.iter().sum();
            prop_assume!(total > 0);
            let masses: Vec<Rational> = nums.iter().map(|&k| rat(k, total)).collect();
            prop_assert!(Dist::new(masses.clone()).is_ok());
            let mut off = masses;
            off[0] = off[0].clone() + rat(1, 1_000_000);
            let rejected = matches!(Dist::new(off), Err(crate::Error::NotNormalized { .. }));
            prop_assert!(rejected);
        }
    }
}
