//! The agent algebra: weighted mixtures, reward-reversal duals, single-site
//! patches, symmetrization, and bounded-depth comparison of agents.

use crate::agents::{Agent, MixNode, Node};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::history::{History, Parity};
use crate::reference::{act_sites, histories_up_to};
use crate::scalar::{from_ratio, Scalar};
use crate::spaces::Spaces;

/// Mixture weights: nonnegative, summing exactly to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<S: Scalar> {
    weights: Vec<S>,
}

impl<S: Scalar> WeightVector<S> {
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
        if !(sum == S::one()) {
            return Err(Error::InvalidWeights {
                reason: "weights must sum to 1".into(),
            });
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights {
                reason: "weight vector is empty".into(),
            });
        }
        Ok(WeightVector {
            weights: vec![from_ratio::<S>(1, n as i64); n],
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
}

/// Weighted average of distributions over a common carrier.
pub fn mix_dists<S: Scalar>(weights: &WeightVector<S>, dists: &[Dist<S>]) -> Result<Dist<S>> {
    if weights.len() != dists.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: dists.len(),
        });
    }
    let n = dists[0].len();
    for d in dists {
        if d.len() != n {
            return Err(Error::CarrierMismatch {
                left: n,
                right: d.len(),
            });
        }
    }
    let mut mass = vec![S::zero(); n];
    for (w, d) in weights.weights().iter().zip(dists.iter()) {
        for (slot, m) in mass.iter_mut().zip(d.masses().iter()) {
            *slot = slot.clone() + w.clone() * m.clone();
        }
    }
    Ok(Dist::from_raw(mass))
}

/// Posterior-weighted mixture of agents. Where every component assigns weight
/// zero to the history the mixture acts uniformly.
pub fn mix_agents<S: Scalar>(
    weights: WeightVector<S>,
    components: Vec<Agent<S>>,
) -> Result<Agent<S>> {
    if weights.len() != components.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: components.len(),
        });
    }
    Ok(Agent::from_node(Node::Mix(MixNode::new(
        weights, components,
    ))))
}

/// The reward-reversal dual: acts at a history as the base agent acts at the
/// history with every reward negated. Requires a negation-closed reward set.
pub fn dual_agent<S: Scalar>(spaces: &Spaces<S>, agent: &Agent<S>) -> Result<Agent<S>> {
    if !spaces.is_negation_closed() {
        return Err(Error::RewardsNotNegationClosed);
    }
    Ok(Agent::from_node(Node::Dual(agent.clone())))
}

/// A single-site replacement: the action distribution to use at one history.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSpec<S: Scalar> {
    pub site: History,
    pub replacement: Dist<S>,
}

/// Overrides the base agent's action distribution at exactly one history.
pub fn patch_agent<S: Scalar>(
    spaces: &Spaces<S>,
    base: &Agent<S>,
    site: History,
    replacement: Dist<S>,
) -> Result<Agent<S>> {
    spaces.check_history(&site)?;
    if site.parity() != Parity::EndsInPercept {
        return Err(Error::WrongParity {
            expected: "ending in a percept",
        });
    }
    if replacement.len() != spaces.num_actions() {
        return Err(Error::CarrierMismatch {
            left: replacement.len(),
            right: spaces.num_actions(),
        });
    }
    Ok(Agent::from_node(Node::Patch {
        base: base.clone(),
        site,
        replacement,
    }))
}

/// Equal-weight mixture of an agent with its dual.
pub fn symmetrize<S: Scalar>(spaces: &Spaces<S>, agent: &Agent<S>) -> Result<Agent<S>> {
    let dual = dual_agent(spaces, agent)?;
    let half = from_ratio::<S>(1, 2);
    mix_agents(
        WeightVector::new(vec![half.clone(), half])?,
        vec![agent.clone(), dual],
    )
}

/// Largest pointwise action-mass difference between two agents over all
/// histories with at most `depth` percepts.
pub fn distance_up_to<S: Scalar>(
    spaces: &Spaces<S>,
    a: &Agent<S>,
    b: &Agent<S>,
    depth: usize,
) -> Result<S> {
    let mut worst = S::zero();
    for h in act_sites(spaces, depth) {
        let da = a.act(spaces, &h)?;
        let db = b.act(spaces, &h)?;
        for (ma, mb) in da.masses().iter().zip(db.masses().iter()) {
            let gap = (ma.clone() - mb.clone()).abs();
            if gap > worst {
                worst = gap;
            }
        }
    }
    Ok(worst)
}

/// True when two agents give weight zero to exactly the same histories and
/// choose identically wherever their weight is positive, over histories with
/// at most `depth` percepts. Agents may differ at histories they both rule
/// out (for example in fallback answers) and still be equivalent.
pub fn equivalent_up_to<S: Scalar>(
    spaces: &Spaces<S>,
    a: &Agent<S>,
    b: &Agent<S>,
    depth: usize,
) -> Result<bool> {
    for h in histories_up_to(spaces, 2 * depth) {
        let pa = a.prob(spaces, &h)?;
        let pb = b.prob(spaces, &h)?;
        if pa.is_zero() != pb.is_zero() {
            return Ok(false);
        }
        if !pa.is_zero()
            && h.parity() == Parity::EndsInPercept
            && a.act(spaces, &h)? != b.act(spaces, &h)?
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True when the agent equals its own dual at every history with at most
/// `depth` percepts.
pub fn self_dual_up_to<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    depth: usize,
) -> Result<bool> {
    let dual = dual_agent(spaces, agent)?;
    equivalent_up_to(spaces, agent, &dual, depth)
}
