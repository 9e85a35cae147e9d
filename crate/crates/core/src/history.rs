//! Alternating percept/action histories.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spaces::{ActionId, Percept, RewardId, Spaces};
use std::borrow::Borrow;

/// One history element: a percept or an action.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Item {
    Percept(Percept),
    Action(ActionId),
}

/// Where a history stands in the percept/action alternation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    Empty,
    EndsInPercept,
    EndsInAction,
}

/// A finite history matching the grammar `percept (action percept)* [action]`,
/// together with the empty history.
///
/// Histories store interned symbol indices only, so they are cheap to hash,
/// compare, and clone, and they are independent of the scalar type.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct History {
    items: Vec<Item>,
}

impl Borrow<[Item]> for History {
    fn borrow(&self) -> &[Item] {
        &self.items
    }
}

impl History {
    pub fn empty() -> Self {
        History { items: Vec::new() }
    }

    /// Validates items against the grammar and the symbol space.
    pub fn new<S: Scalar>(spaces: &Spaces<S>, items: Vec<Item>) -> Result<Self> {
        let mut h = History::empty();
        for item in items {
            h = h.append(spaces, item)?;
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of percepts. Valid histories alternate starting with a percept,
    /// so percepts sit at even item positions.
    pub fn percept_count(&self) -> usize {
        (self.items.len() + 1) / 2
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn parity(&self) -> Parity {
        match self.items.last() {
            None => Parity::Empty,
            Some(Item::Percept(_)) => Parity::EndsInPercept,
            Some(Item::Action(_)) => Parity::EndsInAction,
        }
    }

    /// Appends one item, enforcing alternation and symbol validity.
    pub fn append<S: Scalar>(&self, spaces: &Spaces<S>, item: Item) -> Result<History> {
        spaces.check_item(item)?;
        match (self.parity(), item) {
            (Parity::Empty | Parity::EndsInAction, Item::Percept(_)) => {}
            (Parity::EndsInPercept, Item::Action(_)) => {}
            (_, Item::Percept(_)) => {
                return Err(Error::AlternationViolation {
                    context: "percept must follow an action or start the history".into(),
                })
            }
            (_, Item::Action(_)) => {
                return Err(Error::AlternationViolation {
                    context: "action must follow a percept".into(),
                })
            }
        }
        let mut items = self.items.clone();
        items.push(item);
        Ok(History { items })
    }

    /// The history with every reward replaced by its negation.
    /// Requires a negation closed reward set.
    pub fn dual<S: Scalar>(&self, spaces: &Spaces<S>) -> Result<History> {
        let items = self
            .items
            .iter()
            .map(|&item| match item {
                Item::Percept(p) => Ok(Item::Percept(spaces.negate_percept(p)?)),
                Item::Action(a) => Ok(Item::Action(a)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(History { items })
    }

    /// Most recent percept, if any.
    pub fn last_percept(&self) -> Option<Percept> {
        self.items.iter().rev().find_map(|item| match item {
            Item::Percept(p) => Some(*p),
            Item::Action(_) => None,
        })
    }

    /// Reward of the most recent percept, if any.
    pub fn last_reward(&self) -> Option<RewardId> {
        self.last_percept().map(|p| p.reward)
    }

    /// Sum of all percept rewards along the history.
    pub fn reward_sum<S: Scalar>(&self, spaces: &Spaces<S>) -> S {
        let mut total = S::zero();
        for item in &self.items {
            if let Item::Percept(p) = item {
                total = total + spaces.reward_value(p.reward).clone();
            }
        }
        total
    }

    /// The first `len` items as a history.
    pub fn truncated(&self, len: usize) -> History {
        History {
            items: self.items[..len.min(self.items.len())].to_vec(),
        }
    }

    /// True when `self` is a prefix of `other` (equality included).
    pub fn is_initial_segment_of(&self, other: &History) -> bool {
        other.items.len() >= self.items.len() && other.items[..self.items.len()] == self.items[..]
    }

    pub(crate) fn push(&mut self, item: Item) {
        self.items.push(item);
    }

    pub(crate) fn pop(&mut self) {
        self.items.pop();
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, Rational};
    use proptest::prelude::*;

    fn spaces() -> Spaces<Rational> {
        Spaces::new(
            vec!["a".into(), "b".into()],
            vec!["o".into()],
            vec![rat(-1, 1), rat(0, 1), rat(1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn grammar_accepts_alternation_from_percept() {
        let s = spaces();
        for text in ["", "(o,0)", "(o,0) a", "(o,0) a (o,1)", "(o,0) a (o,1) b"] {
            let h = s.parse_history(text).unwrap();
            assert_eq!(s.history_text(&h), text);
        }
    }

    #[test]
    fn grammar_rejects_wrong_starts_and_doubles() {
        let s = spaces();
        for text in ["a", "(o,0) (o,1)", "(o,0) a b", "(o,0) a (o,1) (o,1)"] {
            assert!(
                matches!(s.parse_history(text), Err(Error::AlternationViolation { .. })),
                "{text:?}"
            );
        }
        assert!(matches!(
            s.parse_history("(o,0) c"),
            Err(Error::SymbolOutOfSpace { .. })
        ));
        assert!(matches!(
            s.parse_history("(q,0)"),
            Err(Error::SymbolOutOfSpace { .. })
        ));
    }

    #[test]
    fn dual_negates_rewards_only() {
        let s = spaces();
        let h = s.parse_history("(o,1) a (o,0) b (o,-1) a").unwrap();
        let d = h.dual(&s).unwrap();
        assert_eq!(s.history_text(&d), "(o,-1) a (o,0) b (o,1) a");
    }

    #[test]
    fn reward_sum_adds_percept_rewards() {
        let s = spaces();
        let h = s.parse_history("(o,1) a (o,1) b (o,-1) a").unwrap();
        assert_eq!(h.reward_sum(&s), rat(1, 1));
    }

    #[test]
    fn prefix_relation_matches_item_slices() {
        let s = spaces();
        let h = s.parse_history("(o,0) a (o,1)").unwrap();
        let p = s.parse_history("(o,0) a").unwrap();
        assert!(p.is_initial_segment_of(&h));
        assert!(h.is_initial_segment_of(&h));
        assert!(!h.is_initial_segment_of(&p));
        assert_eq!(h.truncated(2), p);
    }

    fn arb_history() -> impl Strategy<Value = History> {
        // Random walks through the grammar over the small space.
        proptest::collection::vec((0u16..2, 0u16..1, 0u16..3), 0..12).prop_map(|steps| {
            let s = spaces();
            let mut h = History::empty();
            for (act, obs, rew) in steps {
                let item = match h.parity() {
                    Parity::Empty | Parity::EndsInAction => Item::Percept(Percept {
                        obs: crate::spaces::ObsId(obs),
                        reward: crate::spaces::RewardId(rew),
                    }),
                    Parity::EndsInPercept => Item::Action(ActionId(act)),
                };
                h = h.append(&s, item).unwrap();
            }
            h
        })
    }

    proptest! {
        #[test]
        fn dual_is_an_involution(h in arb_history()) {
            let s = spaces();
            prop_assert_eq!(h.dual(&s).unwrap().dual(&s).unwrap(), h);
        }

        #[test]
        fn text_round_trips(h in arb_history()) {
            let s = spaces();
            prop_assert_eq!(s.parse_history(&s.history_text(&h)).unwrap(), h);
        }
    }
}
