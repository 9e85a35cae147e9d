//! The environment algebra: posterior-weighted mixtures, reward-reversal
//! duals, and the weighted environment that realizes a measure's score as a
//! single value.

use crate::environments::{Env, EnvMixNode, EnvNode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spaces::Spaces;
use crate::valuation::WeightedMeasure;

/// Environment mixture weights: nonnegative, summing to at most 1. Any
/// remainder is assigned to a silent component.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvWeightVector<S: Scalar> {
    weights: Vec<S>,
    residual: S,
}

impl<S: Scalar> EnvWeightVector<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights {
                reason: "weight vector is empty".into(),
            });
        }
        let mut sum = S::zero();
        for (i, w) in weights.iter().enumerate() {
            if *w < S::zero() {
                return Err(Error::InvalidWeights {
                    reason: format!("weight {i} is negative"),
                });
            }
            sum = sum + w.clone();
        }
        if sum > S::one() {
            return Err(Error::InvalidWeights {
                reason: "weights must sum to at most 1".into(),
            });
        }
        Ok(EnvWeightVector {
            weights,
            residual: S::one() - sum,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// Weight left over for the silent component.
    pub fn residual(&self) -> &S {
        &self.residual
    }
}

/// Posterior-weighted mixture of environments. Weight not covered by the
/// given components goes to a silent environment, so the node always carries
/// total weight 1. Where every component assigns weight zero to the history
/// the mixture emits percepts uniformly.
pub fn mix_envs<S: Scalar>(
    spaces: &Spaces<S>,
    weights: EnvWeightVector<S>,
    components: Vec<Env<S>>,
) -> Result<Env<S>> {
    if weights.len() != components.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: components.len(),
        });
    }
    let mut full_weights = weights.weights().to_vec();
    let mut full_components = components;
    if !weights.residual().is_zero() {
        full_weights.push(weights.residual().clone());
        full_components.push(Env::silent(spaces)?);
    }
    let padded = EnvWeightVector {
        weights: full_weights,
        residual: S::zero(),
    };
    Ok(Env::from_node(EnvNode::Mix(EnvMixNode::new(
        padded,
        full_components,
    ))))
}

/// The reward-reversal dual: emits a percept with the probability the base
/// environment gives its reward-negated twin at the reward-negated history.
/// Requires a negation-closed reward set.
pub fn env_dual<S: Scalar>(spaces: &Spaces<S>, env: &Env<S>) -> Result<Env<S>> {
    if !spaces.is_negation_closed() {
        return Err(Error::RewardsNotNegationClosed);
    }
    Ok(Env::from_node(EnvNode::Dual(env.clone())))
}

/// The single environment whose value equals the measure's weighted score
/// for every agent and step count: the mixture of the measure's components
/// under its weights, padded silently when the weights sum below 1.
pub fn universal_env<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
) -> Result<Env<S>> {
    let weights =
        EnvWeightVector::new(measure.entries().iter().map(|(w, _)| w.clone()).collect())?;
    let components = measure
        .entries()
        .iter()
        .map(|(_, env)| env.clone())
        .collect();
    mix_envs(spaces, weights, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Agent;
    use crate::dist::Dist;
    use crate::history::History;
    use crate::reference::oracle_value;
    use crate::valuation::{upsilon, value_at};
    use crate::{rat, Rational};

    fn spaces() -> Spaces<Rational> {
        Spaces::new(
            vec!["a".into(), "b".into()],
            vec!["o".into()],
            vec![rat(-1, 1), rat(0, 1), rat(1, 1)],
        )
        .unwrap()
    }

    fn reward_dist(s: &Spaces<Rational>, pairs: &[(&str, i64, i64)]) -> Dist<Rational> {
        let mut mass = vec![rat(0, 1); s.num_percepts()];
        for (r, n, d) in pairs {
            let x = s.parse_percept(&format!("(o,{r})")).unwrap();
            mass[s.percept_index(x)] = rat(*n, *d);
        }
        Dist::new(mass).unwrap()
    }

    fn pays(s: &Spaces<Rational>, r: &str) -> Env<Rational> {
        let d = reward_dist(s, &[(r, 1, 1)]);
        Env::table(s, vec![(History::empty(), d)], None, Some(1)).unwrap()
    }

    #[test]
    fn env_weight_vectors_allow_subnormal_sums() {
        let w = EnvWeightVector::new(vec![rat(1, 3), rat(1, 3)]).unwrap();
        assert_eq!(w.residual(), &rat(1, 3));
        assert!(EnvWeightVector::new(vec![rat(2, 3), rat(2, 3)]).is_err());
        assert!(EnvWeightVector::<Rational>::new(vec![]).is_err());
    }

    #[test]
    fn mixture_blends_component_chances_by_posterior() {
        let s = spaces();
        let w = EnvWeightVector::new(vec![rat(1, 4), rat(3, 4)]).unwrap();
        let mixed = mix_envs(&s, w, vec![pays(&s, "1"), pays(&s, "-1")]).unwrap();
        let d = mixed.chances(&s, &History::empty()).unwrap();
        let plus = s.parse_percept("(o,1)").unwrap();
        let minus = s.parse_percept("(o,-1)").unwrap();
        assert_eq!(d.mass(s.percept_index(plus)), &rat(1, 4));
        assert_eq!(d.mass(s.percept_index(minus)), &rat(3, 4));
        // After a +1 percept only the first component survives.
        let h = s.parse_history("(o,1) a").unwrap();
        let d2 = mixed.chances(&s, &h).unwrap();
        let quiet = s.parse_percept("(o,0)").unwrap();
        assert_eq!(d2.mass(s.percept_index(quiet)), &rat(1, 1));
    }

    #[test]
    fn residual_weight_pads_with_a_silent_component() {
        let s = spaces();
        let w = EnvWeightVector::new(vec![rat(1, 2)]).unwrap();
        let mixed = mix_envs(&s, w, vec![pays(&s, "1")]).unwrap();
        let d = mixed.chances(&s, &History::empty()).unwrap();
        let plus = s.parse_percept("(o,1)").unwrap();
        let quiet = s.parse_percept("(o,0)").unwrap();
        assert_eq!(d.mass(s.percept_index(plus)), &rat(1, 2));
        assert_eq!(d.mass(s.percept_index(quiet)), &rat(1, 2));
        let u: Agent<Rational> = Agent::uniform();
        assert_eq!(value_at(&s, &u, &mixed, 1).unwrap().value, rat(1, 2));
    }

    #[test]
    fn mixture_value_is_the_weighted_component_value() {
        let s = spaces();
        let w = EnvWeightVector::new(vec![rat(1, 4), rat(3, 4)]).unwrap();
        let comps = vec![pays(&s, "1"), pays(&s, "-1")];
        let mixed = mix_envs(&s, w, comps.clone()).unwrap();
        let u: Agent<Rational> = Agent::uniform();
        for t in 0..=2 {
            let whole = value_at(&s, &u, &mixed, t).unwrap().value;
            let parts = rat(1, 4) * oracle_value(&s, &u, &comps[0], t).unwrap()
                + rat(3, 4) * oracle_value(&s, &u, &comps[1], t).unwrap();
            assert_eq!(whole, parts, "t={t}");
        }
    }

    #[test]
    fn dual_environment_mirrors_rewards() {
        let s = spaces();
        let env = pays(&s, "1");
        let dual = env_dual(&s, &env).unwrap();
        let d = dual.chances(&s, &History::empty()).unwrap();
        let minus = s.parse_percept("(o,-1)").unwrap();
        assert_eq!(d.mass(s.percept_index(minus)), &rat(1, 1));
        let u: Agent<Rational> = Agent::uniform();
        assert_eq!(value_at(&s, &u, &dual, 1).unwrap().value, rat(-1, 1));
    }

    #[test]
    fn universal_environment_realizes_the_measure_score() {
        let s = spaces();
        let m = WeightedMeasure::new(vec![
            (rat(1, 3), pays(&s, "1")),
            (rat(1, 3), pays(&s, "-1")),
        ])
        .unwrap();
        let env = universal_env(&s, &m).unwrap();
        let agents: Vec<Agent<Rational>> = vec![
            Agent::uniform(),
            Agent::constant(&s, s.action_by_name("b").unwrap()).unwrap(),
        ];
        for agent in &agents {
            for t in 0..=2 {
                let direct = upsilon(&s, &m, agent, t).unwrap().value;
                let via_env = value_at(&s, agent, &env, t).unwrap().value;
                assert_eq!(direct, via_env, "t={t}");
            }
        }
    }
}
