//! Environments: total mappings from histories ending in an action (or empty)
//! to percept distributions, with declared bounds on how much expected reward
//! can still arrive after a given number of steps.

use crate::agents::Agent;
use crate::dist::Dist;
use crate::envmix::EnvWeightVector;
use crate::error::{Error, Result};
use crate::history::{History, Item, Parity};
use crate::scalar::{pow, Scalar};
use crate::spaces::{Percept, Spaces};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

/// Upper bound on the magnitude of expected reward arriving strictly after
/// step `t`, as a closed form evaluated by [`TailBound::at`].
#[derive(Clone, Debug, PartialEq)]
pub enum TailBound<S: Scalar> {
    /// No reward ever arrives after the bound's reach: the tail is exactly 0.
    Zero,
    /// Rewards stop after `horizon` steps; each remaining step contributes at
    /// most `per_step`.
    FiniteHorizon { horizon: usize, per_step: S },
    /// Survival decays geometrically with rate `gamma` per step and rewards
    /// have magnitude at most 1, giving `gamma^t / (1 - gamma)`.
    Geometric { gamma: S },
    /// Weighted sum of component bounds.
    Weighted(Vec<(S, TailBound<S>)>),
}

impl<S: Scalar> TailBound<S> {
    /// Evaluate the bound after `t` steps.
    pub fn at(&self, t: usize) -> S {
        match self {
            TailBound::Zero => S::zero(),
            TailBound::FiniteHorizon { horizon, per_step } => {
                if t >= *horizon {
                    S::zero()
                } else {
                    crate::scalar::from_count::<S>(*horizon - t) * per_step.clone()
                }
            }
            TailBound::Geometric { gamma } => {
                pow(gamma, t) / (S::one() - gamma.clone())
            }
            TailBound::Weighted(parts) => {
                let mut total = S::zero();
                for (w, b) in parts {
                    total = total + w.clone() * b.at(t);
                }
                total
            }
        }
    }
}

/// An environment. Cloning is cheap and clones share state, including the
/// memoization inside mixture nodes.
#[derive(Clone)]
pub struct Env<S: Scalar>(Arc<EnvNode<S>>);

pub(crate) enum EnvNode<S: Scalar> {
    Table(EnvTable<S>),
    Terminating {
        base: Env<S>,
        gamma: S,
        term: Percept,
        bound: TailBound<S>,
    },
    Silent {
        percept: Percept,
    },
    Dual(Env<S>),
    Mix(EnvMixNode<S>),
    Opaque(OpaqueEnvNode<S>),
}

pub(crate) struct EnvTable<S: Scalar> {
    pub(crate) entries: std::collections::BTreeMap<History, Dist<S>>,
    pub(crate) default: Dist<S>,
    pub(crate) horizon: Option<usize>,
    pub(crate) quiet: Option<Percept>,
}

pub(crate) struct EnvMixNode<S: Scalar> {
    pub(crate) weights: EnvWeightVector<S>,
    pub(crate) components: Vec<Env<S>>,
    cache: Mutex<HashMap<History, Arc<[S]>>>,
}

pub(crate) struct OpaqueEnvNode<S: Scalar> {
    pub(crate) label: String,
    pub(crate) chances: Box<dyn Fn(&Spaces<S>, &History) -> Dist<S> + Send + Sync>,
    pub(crate) bound: Option<TailBound<S>>,
}

impl<S: Scalar> fmt::Debug for Env<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Env({})", self.label())
    }
}

impl<S: Scalar> EnvMixNode<S> {
    pub(crate) fn new(weights: EnvWeightVector<S>, components: Vec<Env<S>>) -> Self {
        EnvMixNode {
            weights,
            components,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn comp_probs(&self, spaces: &Spaces<S>, h: &History) -> Result<Arc<[S]>> {
        if let Some(v) = self.cache.lock().unwrap().get(h.items()) {
            return Ok(v.clone());
        }
        let v: Arc<[S]> = if h.is_empty() {
            vec![S::one(); self.components.len()].into()
        } else {
            let parent = h.truncated(h.len() - 1);
            let pv = self.comp_probs(spaces, &parent)?;
            match *h.items().last().expect("nonempty") {
                Item::Action(_) => pv,
                Item::Percept(x) => {
                    let idx = spaces.percept_index(x);
                    let mut v = Vec::with_capacity(self.components.len());
                    for (i, comp) in self.components.iter().enumerate() {
                        if pv[i].is_zero() {
                            v.push(S::zero());
                        } else {
                            let d = comp.chances_raw(spaces, &parent)?;
                            v.push(pv[i].clone() * d.mass(idx).clone());
                        }
                    }
                    v.into()
                }
            }
        };
        self.cache.lock().unwrap().insert(h.clone(), v.clone());
        Ok(v)
    }
}

impl<S: Scalar> Env<S> {
    pub(crate) fn from_node(node: EnvNode<S>) -> Self {
        Env(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &EnvNode<S> {
        &self.0
    }

    /// Finite lookup table over histories ending in an action (or empty),
    /// with a default distribution elsewhere (uniform over percepts when not
    /// supplied). With a horizon `H`, once `H` percepts have been emitted the
    /// environment switches to a fixed quiet percept carrying reward zero
    /// (the first observation), and its tail bound after `t` steps is
    /// `(H - t)` times the largest reward magnitude.
    pub fn table(
        spaces: &Spaces<S>,
        entries: Vec<(History, Dist<S>)>,
        default: Option<Dist<S>>,
        horizon: Option<usize>,
    ) -> Result<Self> {
        let n = spaces.num_percepts();
        let default = default.unwrap_or_else(|| Dist::uniform(n));
        if default.len() != n {
            return Err(Error::CarrierMismatch {
                left: default.len(),
                right: n,
            });
        }
        let mut map = std::collections::BTreeMap::new();
        for (h, d) in entries {
            spaces.check_history(&h)?;
            if h.parity() == Parity::EndsInPercept {
                return Err(Error::WrongParity {
                    expected: "empty or ending in an action",
                });
            }
            if d.len() != n {
                return Err(Error::CarrierMismatch {
                    left: d.len(),
                    right: n,
                });
            }
            map.insert(h, d);
        }
        let quiet = match horizon {
            Some(_) => Some(spaces.quiet_percept()?),
            None => None,
        };
        Ok(Env::from_node(EnvNode::Table(EnvTable {
            entries: map,
            default,
            horizon,
            quiet,
        })))
    }

    /// Wraps a base environment with geometric termination: at every live
    /// step the base percept distribution is scaled by `gamma` and the
    /// remaining `1 - gamma` goes to a terminal percept with reward zero.
    /// After the terminal percept has appeared the environment emits it
    /// forever. Requires `0 < gamma < 1`.
    pub fn terminating(spaces: &Spaces<S>, base: Env<S>, gamma: S) -> Result<Self> {
        if gamma <= S::zero() || gamma >= S::one() {
            return Err(Error::BadParams {
                what: "termination rate must lie strictly between 0 and 1".into(),
            });
        }
        let term = spaces.quiet_percept()?;
        let bound = TailBound::Geometric {
            gamma: gamma.clone(),
        };
        Ok(Env::from_node(EnvNode::Terminating {
            base,
            gamma,
            term,
            bound,
        }))
    }

    /// Emits a fixed zero-reward percept forever. Useful as inert padding in
    /// environment mixtures.
    pub fn silent(spaces: &Spaces<S>) -> Result<Self> {
        Ok(Env::from_node(EnvNode::Silent {
            percept: spaces.quiet_percept()?,
        }))
    }

    pub(crate) fn opaque(
        label: String,
        chances: Box<dyn Fn(&Spaces<S>, &History) -> Dist<S> + Send + Sync>,
        bound: Option<TailBound<S>>,
    ) -> Self {
        Env::from_node(EnvNode::Opaque(OpaqueEnvNode {
            label,
            chances,
            bound,
        }))
    }

    /// Percept distribution at a history that is empty or ends in an action,
    /// indexed by [`Spaces::percept_index`].
    pub fn chances(&self, spaces: &Spaces<S>, h: &History) -> Result<Dist<S>> {
        spaces.check_history(h)?;
        if h.parity() == Parity::EndsInPercept {
            return Err(Error::WrongParity {
                expected: "empty or ending in an action",
            });
        }
        self.chances_raw(spaces, h)
    }

    pub(crate) fn chances_raw(&self, spaces: &Spaces<S>, h: &History) -> Result<Dist<S>> {
        let n = spaces.num_percepts();
        match self.node() {
            EnvNode::Table(t) => {
                if let (Some(hor), Some(quiet)) = (t.horizon, t.quiet) {
                    if h.percept_count() >= hor {
                        return Ok(Dist::point(n, spaces.percept_index(quiet)));
                    }
                }
                Ok(t.entries.get(h.items()).unwrap_or(&t.default).clone())
            }
            EnvNode::Terminating {
                base, gamma, term, ..
            } => {
                let term_idx = spaces.percept_index(*term);
                if h.last_percept() == Some(*term) {
                    return Ok(Dist::point(n, term_idx));
                }
                let d = base.chances_raw(spaces, h)?;
                let mut mass: Vec<S> =
                    d.masses().iter().map(|m| gamma.clone() * m.clone()).collect();
                mass[term_idx] = mass[term_idx].clone() + (S::one() - gamma.clone());
                Ok(Dist::from_raw(mass))
            }
            EnvNode::Silent { percept } => {
                Ok(Dist::point(n, spaces.percept_index(*percept)))
            }
            EnvNode::Dual(base) => {
                let d = base.chances_raw(spaces, &h.dual(spaces)?)?;
                let mut mass = vec![S::zero(); n];
                for (idx, slot) in mass.iter_mut().enumerate() {
                    let mirrored = spaces.negate_percept(spaces.percept_at(idx))?;
                    *slot = d.mass(spaces.percept_index(mirrored)).clone();
                }
                Ok(Dist::from_raw(mass))
            }
            EnvNode::Mix(mix) => {
                let probs = mix.comp_probs(spaces, h)?;
                let mut den = S::zero();
                for (w, p) in mix.weights.weights().iter().zip(probs.iter()) {
                    den = den + w.clone() * p.clone();
                }
                if den.is_zero() {
                    return Ok(Dist::uniform(n));
                }
                let mut mass = vec![S::zero(); n];
                for (i, comp) in mix.components.iter().enumerate() {
                    if probs[i].is_zero() {
                        continue;
                    }
                    let d = comp.chances_raw(spaces, h)?;
                    let wp = mix.weights.weights()[i].clone() * probs[i].clone();
                    for (x, m) in mass.iter_mut().enumerate() {
                        *m = m.clone() + wp.clone() * d.mass(x).clone();
                    }
                }
                for m in mass.iter_mut() {
                    *m = m.clone() / den.clone();
                }
                Ok(Dist::from_raw(mass))
            }
            EnvNode::Opaque(o) => Ok((o.chances)(spaces, h)),
        }
    }

    /// Weight the environment assigns to the percepts along `h`: the product
    /// of its percept masses at every percept position.
    pub fn prob(&self, spaces: &Spaces<S>, h: &History) -> Result<S> {
        spaces.check_history(h)?;
        let mut p = S::one();
        for (k, item) in h.items().iter().enumerate() {
            if let Item::Percept(x) = item {
                if p.is_zero() {
                    return Ok(p);
                }
                let prefix = h.truncated(k);
                let d = self.chances_raw(spaces, &prefix)?;
                p = p * d.mass(spaces.percept_index(*x)).clone();
            }
        }
        Ok(p)
    }

    /// Declared tail bound, when the construction provides one.
    pub fn tail_bound(&self, spaces: &Spaces<S>) -> Option<TailBound<S>> {
        match self.node() {
            EnvNode::Table(t) => t.horizon.map(|horizon| {
                if spaces.max_abs_reward().is_zero() {
                    TailBound::Zero
                } else {
                    TailBound::FiniteHorizon {
                        horizon,
                        per_step: spaces.max_abs_reward().clone(),
                    }
                }
            }),
            EnvNode::Terminating { bound, .. } => Some(bound.clone()),
            EnvNode::Silent { .. } => Some(TailBound::Zero),
            EnvNode::Dual(base) => base.tail_bound(spaces),
            EnvNode::Mix(mix) => {
                let mut parts = Vec::with_capacity(mix.components.len());
                for (w, comp) in mix
                    .weights
                    .weights()
                    .iter()
                    .zip(mix.components.iter())
                {
                    parts.push((w.clone(), comp.tail_bound(spaces)?));
                }
                Some(TailBound::Weighted(parts))
            }
            EnvNode::Opaque(o) => o.bound.clone(),
        }
    }

    /// Compact structural description, used in reports.
    pub fn label(&self) -> String {
        match self.node() {
            EnvNode::Table(t) => match t.horizon {
                Some(h) => format!("table[{} entries,horizon {h}]", t.entries.len()),
                None => format!("table[{} entries]", t.entries.len()),
            },
            EnvNode::Terminating { base, gamma, .. } => {
                format!("terminating({},{gamma})", base.label())
            }
            EnvNode::Silent { .. } => "silent".into(),
            EnvNode::Dual(base) => format!("envdual({})", base.label()),
            EnvNode::Mix(m) => {
                let ws = m
                    .weights
                    .weights()
                    .iter()
                    .map(|w| w.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                let cs = m
                    .components
                    .iter()
                    .map(|c| c.label())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("envmix(({ws}),({cs}))")
            }
            EnvNode::Opaque(o) => o.label.clone(),
        }
    }
}

/// Weight jointly assigned to `h` by an agent and an environment: the product
/// over all positions, action masses from the agent and percept masses from
/// the environment, computed in one walk.
pub fn joint_prob<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    h: &History,
) -> Result<S> {
    spaces.check_history(h)?;
    let mut p = S::one();
    for (k, item) in h.items().iter().enumerate() {
        if p.is_zero() {
            return Ok(p);
        }
        let prefix = h.truncated(k);
        match item {
            Item::Action(y) => {
                p = p * agent.act_raw(spaces, &prefix)?.mass(y.index()).clone();
            }
            Item::Percept(x) => {
                let d = env.chances_raw(spaces, &prefix)?;
                p = p * d.mass(spaces.percept_index(*x)).clone();
            }
        }
    }
    Ok(p)
}

/// Largest and smallest expected cumulative reward after exactly `t` percepts
/// that any agent can extract, computed by backward induction over the
/// environment's support.
fn extreme_value<S: Scalar>(
    spaces: &Spaces<S>,
    env: &Env<S>,
    t: usize,
    maximize: bool,
) -> Result<S> {
    fn go<S: Scalar>(
        spaces: &Spaces<S>,
        env: &Env<S>,
        h: &mut History,
        remaining: usize,
        maximize: bool,
    ) -> Result<S> {
        if remaining == 0 {
            return Ok(S::zero());
        }
        let d = env.chances_raw(spaces, h)?;
        let mut total = S::zero();
        for (idx, m) in d.masses().iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let x = spaces.percept_at(idx);
            h.push(Item::Percept(x));
            let mut best: Option<S> = None;
            if remaining == 1 {
                best = Some(S::zero());
            } else {
                for y in spaces.action_ids() {
                    h.push(Item::Action(y));
                    let v = go(spaces, env, h, remaining - 1, maximize)?;
                    h.pop();
                    best = Some(match best {
                        None => v,
                        Some(b) => {
                            if (maximize && v > b) || (!maximize && v < b) {
                                v
                            } else {
                                b
                            }
                        }
                    });
                }
            }
            h.pop();
            let step = spaces.reward_value(x.reward).clone() + best.expect("actions nonempty");
            total = total + m.clone() * step;
        }
        Ok(total)
    }
    go(spaces, env, &mut History::empty(), t, maximize)
}

/// Certifies that every agent's expected cumulative reward stays within
/// `[-1, 1]` at every step count. Extremes up to `depth` are computed exactly
/// by backward induction; beyond `depth` the environment's tail bound closes
/// the argument. Returns `false` when a violation is found or the tail is too
/// loose to decide; errors when the environment declares no tail bound.
pub fn certify_strongly_well_behaved<S: Scalar>(
    spaces: &Spaces<S>,
    env: &Env<S>,
    depth: usize,
) -> Result<bool> {
    let bound = env.tail_bound(spaces).ok_or(Error::NoTailBound)?;
    let one = S::one();
    for t in 0..=depth {
        let hi = extreme_value(spaces, env, t, true)?;
        let lo = extreme_value(spaces, env, t, false)?;
        if hi > one || lo < -one.clone() {
            return Ok(false);
        }
        if t == depth {
            let slack = bound.at(t);
            if hi + slack.clone() > one || lo - slack < -one.clone() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
