//! Exhaustive enumeration and a flat summation oracle. Everything here is
//! written as a direct transcription of the defining sums, with no pruning,
//! memoization, or budgets, so it can serve as an independent cross-check for
//! the recursive evaluator.

use crate::agents::Agent;
use crate::dist::Dist;
use crate::environments::Env;
use crate::error::Result;
use crate::history::{History, Item};
use crate::scalar::Scalar;
use crate::spaces::Spaces;

/// All grammar-valid histories with exactly `len` items.
pub fn histories_with_len<S: Scalar>(spaces: &Spaces<S>, len: usize) -> Vec<History> {
    let mut acc = vec![History::empty()];
    for position in 0..len {
        let mut next = Vec::new();
        for h in &acc {
            if position % 2 == 0 {
                for x in spaces.percepts() {
                    let mut g = h.clone();
                    g.push(Item::Percept(x));
                    next.push(g);
                }
            } else {
                for y in spaces.action_ids() {
                    let mut g = h.clone();
                    g.push(Item::Action(y));
                    next.push(g);
                }
            }
        }
        acc = next;
    }
    acc
}

/// All grammar-valid histories with at most `max_len` items, shortest first.
pub fn histories_up_to<S: Scalar>(spaces: &Spaces<S>, max_len: usize) -> Vec<History> {
    (0..=max_len)
        .flat_map(|len| histories_with_len(spaces, len))
        .collect()
}

/// All histories where an agent acts (ending in a percept) with at most
/// `max_percepts` percepts.
pub fn act_sites<S: Scalar>(spaces: &Spaces<S>, max_percepts: usize) -> Vec<History> {
    (1..=max_percepts)
        .flat_map(|k| histories_with_len(spaces, 2 * k - 1))
        .collect()
}

/// The valuation domain after `t` steps: histories with `t` percepts and `t`
/// actions.
pub fn step_histories<S: Scalar>(spaces: &Spaces<S>, t: usize) -> Vec<History> {
    histories_with_len(spaces, 2 * t)
}

/// Joint weight of `h` computed as a literal product over positions.
fn flat_joint_prob<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    h: &History,
) -> Result<S> {
    let mut p = S::one();
    for (k, item) in h.items().iter().enumerate() {
        let prefix = h.truncated(k);
        let factor = match item {
            Item::Action(y) => agent.act(spaces, &prefix)?.mass(y.index()).clone(),
            Item::Percept(x) => {
                let d = env.chances(spaces, &prefix)?;
                d.mass(spaces.percept_index(*x)).clone()
            }
        };
        p = p * factor;
    }
    Ok(p)
}

/// Expected cumulative reward after `t` steps, as the full sum of reward
/// total times joint weight over every history in the step domain.
pub fn oracle_value<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<S> {
    let mut total = S::zero();
    for h in step_histories(spaces, t) {
        let r: S = h.reward_sum(spaces);
        total = total + r * flat_joint_prob(spaces, agent, env, &h)?;
    }
    Ok(total)
}

/// Weighted sum of oracle values across environment components.
pub fn oracle_weighted_value<S: Scalar>(
    spaces: &Spaces<S>,
    entries: &[(S, Env<S>)],
    agent: &Agent<S>,
    t: usize,
) -> Result<S> {
    let mut total = S::zero();
    for (w, env) in entries {
        total = total + w.clone() * oracle_value(spaces, agent, env, t)?;
    }
    Ok(total)
}

/// Action distribution of a posterior-weighted mixture computed directly from
/// the definition, without the incremental cache used by mixture agents.
pub fn oracle_mixture_act<S: Scalar>(
    spaces: &Spaces<S>,
    weights: &[S],
    components: &[Agent<S>],
    h: &History,
) -> Result<Dist<S>> {
    let mut den = S::zero();
    for (w, c) in weights.iter().zip(components.iter()) {
        den = den + w.clone() * c.prob(spaces, h)?;
    }
    let n = spaces.num_actions();
    if den.is_zero() {
        return Ok(Dist::uniform(n));
    }
    let mut mass = Vec::with_capacity(n);
    for y in spaces.action_ids() {
        let mut g = h.clone();
        g.push(Item::Action(y));
        let mut num = S::zero();
        for (w, c) in weights.iter().zip(components.iter()) {
            num = num + w.clone() * c.prob(spaces, &g)?;
        }
        mass.push(num / den.clone());
    }
    Dist::new(mass)
}
