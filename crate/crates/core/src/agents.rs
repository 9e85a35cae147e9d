//! Agents: total mappings from histories ending in a percept to action
//! distributions, together with their multiplicative history weights.

use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::history::{History, Item, Parity};
use crate::mixtures::WeightVector;
use crate::scalar::Scalar;
use crate::spaces::{ActionId, Spaces};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

/// An agent. Cloning is cheap and clones share state, including the
/// memoization inside mixture nodes.
#[derive(Clone)]
pub struct Agent<S: Scalar>(Arc<Node<S>>);

pub(crate) enum Node<S: Scalar> {
    Uniform,
    Constant(ActionId),
    Table(Table<S>),
    Greedy {
        threshold: S,
        hi: ActionId,
        lo: ActionId,
    },
    Mix(MixNode<S>),
    Dual(Agent<S>),
    Patch {
        base: Agent<S>,
        site: History,
        replacement: Dist<S>,
    },
    Opaque(OpaqueNode<S>),
}

pub(crate) struct Table<S: Scalar> {
    pub(crate) entries: std::collections::BTreeMap<History, Dist<S>>,
    pub(crate) default: Dist<S>,
}

/// Posterior-weighted mixture: the action distribution is the weighted sum of
/// component history weights after the candidate action, divided by the
/// weighted sum at the current history; when that denominator is zero the
/// mixture falls back to the uniform action distribution.
pub(crate) struct MixNode<S: Scalar> {
    pub(crate) weights: WeightVector<S>,
    pub(crate) components: Vec<Agent<S>>,
    cache: Mutex<HashMap<History, Arc<[S]>>>,
}

/// Escape hatch for bespoke behaviors; used by the defect catalogue and
/// available for experiments. The closure must be pure: equal histories must
/// always produce equal distributions.
pub(crate) struct OpaqueNode<S: Scalar> {
    pub(crate) label: String,
    pub(crate) act: Box<dyn Fn(&Spaces<S>, &History) -> Dist<S> + Send + Sync>,
}

impl<S: Scalar> fmt::Debug for Agent<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Agent({})", self.label())
    }
}

impl<S: Scalar> MixNode<S> {
    pub(crate) fn new(weights: WeightVector<S>, components: Vec<Agent<S>>) -> Self {
        MixNode {
            weights,
            components,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Component history weights at `h`, memoized. One table is shared by all
    /// queries against this mixture instance; entries are immutable once
    /// inserted, so concurrent readers always observe the same values.
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
                Item::Percept(_) => pv,
                Item::Action(y) => {
                    let mut v = Vec::with_capacity(self.components.len());
                    for (i, comp) in self.components.iter().enumerate() {
                        if pv[i].is_zero() {
                            v.push(S::zero());
                        } else {
                            let a = comp.act_raw(spaces, &parent)?;
                            v.push(pv[i].clone() * a.mass(y.index()).clone());
                        }
                    }
                    v.into()
                }
            }
        };
        self.cache
            .lock()
            .unwrap()
            .insert(h.clone(), v.clone());
        Ok(v)
    }
}

impl<S: Scalar> Agent<S> {
    pub(crate) fn from_node(node: Node<S>) -> Self {
        Agent(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node<S> {
        &self.0
    }

    /// Uniform over all actions at every history.
    pub fn uniform() -> Self {
        Agent::from_node(Node::Uniform)
    }

    /// Always plays the given action.
    pub fn constant(spaces: &Spaces<S>, action: ActionId) -> Result<Self> {
        spaces.check_item(Item::Action(action))?;
        Ok(Agent::from_node(Node::Constant(action)))
    }

    /// Finite lookup table over histories ending in a percept, with a default
    /// distribution elsewhere (uniform when not supplied).
    pub fn table(
        spaces: &Spaces<S>,
        entries: Vec<(History, Dist<S>)>,
        default: Option<Dist<S>>,
    ) -> Result<Self> {
        let n = spaces.num_actions();
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
            if h.parity() != Parity::EndsInPercept {
                return Err(Error::WrongParity {
                    expected: "ending in a percept",
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
        Ok(Agent::from_node(Node::Table(Table {
            entries: map,
            default,
        })))
    }

    /// Plays `hi` when the most recent reward is at least `threshold`, `lo`
    /// otherwise.
    pub fn last_reward_greedy(
        spaces: &Spaces<S>,
        threshold: S,
        hi: ActionId,
        lo: ActionId,
    ) -> Result<Self> {
        spaces.check_item(Item::Action(hi))?;
        spaces.check_item(Item::Action(lo))?;
        Ok(Agent::from_node(Node::Greedy { threshold, hi, lo }))
    }

    pub(crate) fn opaque(
        label: String,
        act: Box<dyn Fn(&Spaces<S>, &History) -> Dist<S> + Send + Sync>,
    ) -> Self {
        Agent::from_node(Node::Opaque(OpaqueNode { label, act }))
    }

    /// Action distribution at a history ending in a percept.
    pub fn act(&self, spaces: &Spaces<S>, h: &History) -> Result<Dist<S>> {
        spaces.check_history(h)?;
        if h.parity() != Parity::EndsInPercept {
            return Err(Error::WrongParity {
                expected: "ending in a percept",
            });
        }
        self.act_raw(spaces, h)
    }

    /// Dispatch without revalidating the history.
    pub(crate) fn act_raw(&self, spaces: &Spaces<S>, h: &History) -> Result<Dist<S>> {
        let n = spaces.num_actions();
        match self.node() {
            Node::Uniform => Ok(Dist::uniform(n)),
            Node::Constant(a) => Ok(Dist::point(n, a.index())),
            Node::Table(t) => Ok(t.entries.get(h.items()).unwrap_or(&t.default).clone()),
            Node::Greedy { threshold, hi, lo } => {
                let reward = h.last_reward().expect("act at a percept");
                let choice = if spaces.reward_value(reward) >= threshold {
                    *hi
                } else {
                    *lo
                };
                Ok(Dist::point(n, choice.index()))
            }
            Node::Mix(mix) => {
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
                    let a = comp.act_raw(spaces, h)?;
                    let wp = mix.weights.weights()[i].clone() * probs[i].clone();
                    for (y, m) in mass.iter_mut().enumerate() {
                        *m = m.clone() + wp.clone() * a.mass(y).clone();
                    }
                }
                for m in mass.iter_mut() {
                    *m = m.clone() / den.clone();
                }
                Ok(Dist::from_raw(mass))
            }
            Node::Dual(base) => base.act_raw(spaces, &h.dual(spaces)?),
            Node::Patch {
                base,
                site,
                replacement,
            } => {
                if h == site {
                    Ok(replacement.clone())
                } else {
                    base.act_raw(spaces, h)
                }
            }
            Node::Opaque(o) => Ok((o.act)(spaces, h)),
        }
    }

    /// Weight the agent assigns to the action choices along `h`: the product
    /// of its action masses at every action position, 1 for the empty
    /// history, unchanged by percept positions.
    pub fn prob(&self, spaces: &Spaces<S>, h: &History) -> Result<S> {
        spaces.check_history(h)?;
        let mut p = S::one();
        for (k, item) in h.items().iter().enumerate() {
            if let Item::Action(y) = item {
                if p.is_zero() {
                    return Ok(p);
                }
                let prefix = h.truncated(k);
                p = p * self.act_raw(spaces, &prefix)?.mass(y.index()).clone();
            }
        }
        Ok(p)
    }

    /// Compact structural description, used in reports.
    pub fn label(&self) -> String {
        match self.node() {
            Node::Uniform => "uniform".into(),
            Node::Constant(a) => format!("constant(#{})", a.index()),
            Node::Table(t) => format!("table[{} entries]", t.entries.len()),
            Node::Greedy { threshold, hi, lo } => {
                format!("greedy({threshold},#{},#{})", hi.index(), lo.index())
            }
            Node::Mix(m) => {
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
                format!("mix(({ws}),({cs}))")
            }
            Node::Dual(b) => format!("dual({})", b.label()),
            Node::Patch { base, site, .. } => {
                format!("patch({},len{})", base.label(), site.len())
            }
            Node::Opaque(o) => o.label.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, Rational};

    fn spaces() -> Spaces<Rational> {
        Spaces::new(
            vec!["a".into(), "b".into()],
            vec!["o".into()],
            vec![rat(-1, 1), rat(0, 1), rat(1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn uniform_weight_of_two_choices_is_a_quarter() {
        let s = spaces();
        let u: Agent<Rational> = Agent::uniform();
        let h = s.parse_history("(o,0) a (o,0) b").unwrap();
        assert_eq!(u.prob(&s, &h).unwrap(), rat(1, 4));
    }

    #[test]
    fn weight_recursion_matches_its_defining_clauses() {
        let s = spaces();
        let agent = Agent::table(
            &s,
            vec![(
                s.parse_history("(o,1)").unwrap(),
                Dist::new(vec![rat(1, 4), rat(3, 4)]).unwrap(),
            )],
            Some(Dist::new(vec![rat(1, 3), rat(2, 3)]).unwrap()),
        )
        .unwrap();
        assert_eq!(agent.prob(&s, &History::empty()).unwrap(), rat(1, 1));
        let g = s.parse_history("(o,1)").unwrap();
        // Appending a percept leaves the weight unchanged.
        assert_eq!(agent.prob(&s, &g).unwrap(), rat(1, 1));
        // Appending an action multiplies by the action mass at the prefix.
        let ha = s.parse_history("(o,1) a").unwrap();
        let hb = s.parse_history("(o,1) b").unwrap();
        assert_eq!(agent.prob(&s, &ha).unwrap(), rat(1, 4));
        assert_eq!(agent.prob(&s, &hb).unwrap(), rat(3, 4));
        let deeper = s.parse_history("(o,1) b (o,-1) a").unwrap();
        assert_eq!(agent.prob(&s, &deeper).unwrap(), rat(3, 4) * rat(1, 3));
    }

    #[test]
    fn greedy_compares_last_reward_to_threshold() {
        let s = spaces();
        let b = s.action_by_name("b").unwrap();
        let a = s.action_by_name("a").unwrap();
        let g = Agent::last_reward_greedy(&s, rat(1, 1), b, a).unwrap();
        let at_plus = s.parse_history("(o,1)").unwrap();
        let at_zero = s.parse_history("(o,0)").unwrap();
        assert_eq!(g.act(&s, &at_plus).unwrap(), Dist::point(2, b.index()));
        assert_eq!(g.act(&s, &at_zero).unwrap(), Dist::point(2, a.index()));
        let deep = s.parse_history("(o,1) a (o,-1)").unwrap();
        assert_eq!(g.act(&s, &deep).unwrap(), Dist::point(2, a.index()));
    }

    #[test]
    fn act_requires_percept_parity() {
        let s = spaces();
        let u: Agent<Rational> = Agent::uniform();
        let err = u.act(&s, &History::empty()).unwrap_err();
        assert!(matches!(err, Error::WrongParity { .. }));
        let ends_in_action = s.parse_history("(o,0) a").unwrap();
        assert!(u.act(&s, &ends_in_action).is_err());
    }

    #[test]
    fn table_falls_back_to_default() {
        let s = spaces();
        let entry = s.parse_history("(o,1)").unwrap();
        let t = Agent::table(
            &s,
            vec![(entry.clone(), Dist::point(2, 0))],
            Some(Dist::new(vec![rat(1, 3), rat(2, 3)]).unwrap()),
        )
        .unwrap();
        assert_eq!(t.act(&s, &entry).unwrap(), Dist::point(2, 0));
        let other = s.parse_history("(o,0)").unwrap();
        assert_eq!(t.act(&s, &other).unwrap().mass(1), &rat(2, 3));
    }

    #[test]
    fn table_rejects_wrong_parity_keys_and_carriers() {
        let s = spaces();
        let bad_key = s.parse_history("(o,1) a").unwrap();
        assert!(matches!(
            Agent::<Rational>::table(&s, vec![(bad_key, Dist::point(2, 0))], None),
            Err(Error::WrongParity { .. })
        ));
        let key = s.parse_history("(o,1)").unwrap();
        assert!(matches!(
            Agent::<Rational>::table(&s, vec![(key, Dist::point(3, 0))], None),
            Err(Error::CarrierMismatch { .. })
        ));
    }

    #[test]
    fn repeated_queries_are_transparent() {
        let s = spaces();
        let u: Agent<Rational> = Agent::uniform();
        let h = s.parse_history("(o,0)").unwrap();
        let first = u.act(&s, &h).unwrap();
        let second = u.act(&s, &h).unwrap();
        assert_eq!(first, second);
        assert_eq!(u.prob(&s, &h).unwrap(), u.prob(&s, &h).unwrap());
    }
}
