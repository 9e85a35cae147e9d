//! A catalogue of deliberately broken constructions. Each entry packages a
//! defective agent or environment together with the correct ingredients it
//! claims to be built from, so the checks in [`crate::analysis`] can be shown
//! to flag each one with a concrete counterexample.

use crate::agents::Agent;
use crate::dist::Dist;
use crate::environments::{Env, TailBound};
use crate::error::{Error, Result};
use crate::history::History;
use crate::scalar::{from_ratio, Scalar};
use crate::spaces::Spaces;

/// What a defective subject claims to be.
pub enum DefectSubject<S: Scalar> {
    /// A broken mixture: the claimed weights and components, and the agent
    /// that pretends to be their mixture.
    Mixture {
        claimed_weights: Vec<S>,
        components: Vec<Agent<S>>,
        mixture: Agent<S>,
    },
    /// A broken dual: the base agent and the agent that pretends to be its
    /// dual.
    Dual { base: Agent<S>, dual: Agent<S> },
    /// An environment whose declared tail bound understates what can still
    /// arrive.
    Environment { env: Env<S> },
}

pub struct Defect<S: Scalar> {
    pub name: &'static str,
    pub description: &'static str,
    pub subject: DefectSubject<S>,
}

fn posterior<S: Scalar>(
    spaces: &Spaces<S>,
    weights: &[S],
    components: &[Agent<S>],
    h: &History,
) -> Vec<S> {
    weights
        .iter()
        .zip(components.iter())
        .map(|(w, c)| w.clone() * c.prob(spaces, h).expect("component weight"))
        .collect()
}

fn bayes_numerators<S: Scalar>(
    spaces: &Spaces<S>,
    weights: &[S],
    components: &[Agent<S>],
    h: &History,
) -> Vec<S> {
    let post = posterior(spaces, weights, components, h);
    let mut mass = vec![S::zero(); spaces.num_actions()];
    for (i, c) in components.iter().enumerate() {
        if post[i].is_zero() {
            continue;
        }
        let a = c.act(spaces, h).expect("component act");
        for (slot, m) in mass.iter_mut().zip(a.masses().iter()) {
            *slot = slot.clone() + post[i].clone() * m.clone();
        }
    }
    mass
}

/// Builds the five catalogued defects against the given spaces. Requires at
/// least two actions, reward zero, and a negation-closed reward set
/// containing 1 and -1.
pub fn catalogue<S: Scalar>(spaces: &Spaces<S>) -> Result<Vec<Defect<S>>> {
    if spaces.num_actions() < 2 {
        return Err(Error::BadParams {
            what: "defect catalogue needs at least two actions".into(),
        });
    }
    if !spaces.is_negation_closed() || spaces.reward_by_value(&S::one()).is_none() {
        return Err(Error::BadParams {
            what: "defect catalogue needs negation-closed rewards containing 1".into(),
        });
    }
    spaces.quiet_percept()?;

    let a0 = spaces.action_ids().next().expect("actions nonempty");
    let a1 = spaces.action_ids().nth(1).expect("two actions");
    let const0 = Agent::constant(spaces, a0)?;
    let const1 = Agent::constant(spaces, a1)?;
    let half = from_ratio::<S>(1, 2);

    let mut defects = Vec::new();

    // 1. Zero-posterior fallback returns a point mass instead of uniform.
    {
        let weights = vec![half.clone(), half.clone()];
        let components = vec![const0.clone(), const1.clone()];
        let (w, c) = (weights.clone(), components.clone());
        let mixture = Agent::opaque(
            "defect:nonuniform_fallback".into(),
            Box::new(move |spaces, h| {
                let post = posterior(spaces, &w, &c, h);
                let mut den = S::zero();
                for p in &post {
                    den = den + p.clone();
                }
                if den.is_zero() {
                    return Dist::point(spaces.num_actions(), 0);
                }
                let mut mass = bayes_numerators(spaces, &w, &c, h);
                for m in mass.iter_mut() {
                    *m = m.clone() / den.clone();
                }
                Dist::from_raw(mass)
            }),
        );
        defects.push(Defect {
            name: "nonuniform_fallback",
            description: "mixture answers a point mass instead of uniform where every \
                          component has weight zero",
            subject: DefectSubject::Mixture {
                claimed_weights: weights,
                components,
                mixture,
            },
        });
    }

    // 2. Weight vector (1/2, 1/3) used as-is, skipping normalization checks.
    {
        let weights = vec![half.clone(), from_ratio::<S>(1, 3)];
        let components = vec![const0.clone(), Agent::uniform()];
        let (w, c) = (weights.clone(), components.clone());
        let mixture = Agent::opaque(
            "defect:unnormalized_weights".into(),
            Box::new(move |spaces, h| {
                let post = posterior(spaces, &w, &c, h);
                let mut den = S::zero();
                for p in &post {
                    den = den + p.clone();
                }
                if den.is_zero() {
                    return Dist::uniform(spaces.num_actions());
                }
                let mut mass = bayes_numerators(spaces, &w, &c, h);
                for m in mass.iter_mut() {
                    *m = m.clone() / den.clone();
                }
                Dist::from_raw(mass)
            }),
        );
        defects.push(Defect {
            name: "unnormalized_weights",
            description: "mixture accepts weights summing to 5/6 without rejecting or \
                          rescaling them",
            subject: DefectSubject::Mixture {
                claimed_weights: weights,
                components,
                mixture,
            },
        });
    }

    // 3. Bayes numerators emitted without dividing by the evidence.
    {
        let weights = vec![half.clone(), half.clone()];
        let components = vec![const0.clone(), Agent::uniform()];
        let (w, c) = (weights.clone(), components.clone());
        let mixture = Agent::opaque(
            "defect:missing_bayes_denominator".into(),
            Box::new(move |spaces, h| {
                let post = posterior(spaces, &w, &c, h);
                let mut den = S::zero();
                for p in &post {
                    den = den + p.clone();
                }
                if den.is_zero() {
                    return Dist::uniform(spaces.num_actions());
                }
                Dist::from_raw(bayes_numerators(spaces, &w, &c, h))
            }),
        );
        defects.push(Defect {
            name: "missing_bayes_denominator",
            description: "mixture returns unnormalized posterior-weighted masses",
            subject: DefectSubject::Mixture {
                claimed_weights: weights,
                components,
                mixture,
            },
        });
    }

    // 4. A "dual" that never negates rewards: it is the base agent verbatim.
    {
        let one = S::one();
        let base = Agent::last_reward_greedy(spaces, one, a1, a0)?;
        let inner = base.clone();
        let dual = Agent::opaque(
            "defect:dual_skips_negation".into(),
            Box::new(move |spaces, h| inner.act(spaces, h).expect("base act")),
        );
        defects.push(Defect {
            name: "dual_skips_negation",
            description: "claimed dual acts on the original history instead of the \
                          reward-reversed one",
            subject: DefectSubject::Dual { base, dual },
        });
    }

    // 5. A three-step environment paying +1 each step, declaring half its
    // true tail bound.
    {
        let plus = spaces
            .reward_by_value(&S::one())
            .expect("checked above");
        let obs0 = spaces.percepts().next().expect("percepts nonempty").obs;
        let plus_idx = spaces.percept_index(crate::spaces::Percept {
            obs: obs0,
            reward: plus,
        });
        let mut mass = vec![S::zero(); spaces.num_percepts()];
        mass[plus_idx] = S::one();
        let inner = Env::table(
            spaces,
            vec![],
            Some(Dist::new(mass).expect("point mass")),
            Some(3),
        )?;
        let claimed = TailBound::Weighted(vec![(
            half.clone(),
            TailBound::FiniteHorizon {
                horizon: 3,
                per_step: spaces.max_abs_reward().clone(),
            },
        )]);
        let env = Env::opaque(
            "defect:halved_tail_bound".into(),
            Box::new(move |spaces, h| inner.chances(spaces, h).expect("table chances")),
            Some(claimed),
        );
        defects.push(Defect {
            name: "halved_tail_bound",
            description: "environment declares half the tail bound its rewards require",
            subject: DefectSubject::Environment { env },
        });
    }

    Ok(defects)
}
