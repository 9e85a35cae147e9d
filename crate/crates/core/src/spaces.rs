//! Interned action, observation, and reward spaces.

use crate::error::{Error, Result};
use crate::history::{History, Item};
use crate::scalar::Scalar;

/// Index of an action symbol within its [`Spaces`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ActionId(pub(crate) u16);

/// Index of an observation symbol within its [`Spaces`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ObsId(pub(crate) u16);

/// Index of a reward value within its [`Spaces`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RewardId(pub(crate) u16);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObsId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RewardId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An observation paired with a reward.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Percept {
    pub obs: ObsId,
    pub reward: RewardId,
}

/// Finite, ordered symbol spaces: actions, observations, and rewards.
///
/// Rewards are scalars in [-1, 1]. Percepts are observation/reward pairs,
/// enumerated in row-major order (observation index first). Symbol names are
/// interned; histories and distributions refer to symbols by index only.
#[derive(Clone, Debug)]
pub struct Spaces<S: Scalar> {
    actions: Vec<String>,
    observations: Vec<String>,
    rewards: Vec<S>,
    reward_names: Vec<String>,
    negation: Option<Vec<RewardId>>,
    zero_reward: Option<RewardId>,
    max_abs_reward: S,
}

fn check_symbol(name: &str, role: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '"'));
    if ok {
        Ok(())
    } else {
        Err(Error::BadParams {
            what: format!("{role} symbol {name:?} is empty or contains whitespace, parentheses, commas, or quotes"),
        })
    }
}

fn check_distinct(names: &[String], role: &str) -> Result<()> {
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(Error::BadParams {
                what: format!("duplicate {role} symbol {a:?}"),
            });
        }
    }
    Ok(())
}

impl<S: Scalar> Spaces<S> {
    /// Builds and validates a symbol space. Rewards must be distinct scalars
    /// in [-1, 1]; every list must be nonempty.
    pub fn new(actions: Vec<String>, observations: Vec<String>, rewards: Vec<S>) -> Result<Self> {
        for (list, role) in [(&actions, "action"), (&observations, "observation")] {
            if list.is_empty() {
                return Err(Error::BadParams {
                    what: format!("{role} list is empty"),
                });
            }
            if list.len() > u16::MAX as usize {
                return Err(Error::BadParams {
                    what: format!("{role} list is too large"),
                });
            }
            for name in list.iter() {
                check_symbol(name, role)?;
            }
            check_distinct(list, role)?;
        }
        if rewards.is_empty() {
            return Err(Error::BadParams {
                what: "reward list is empty".into(),
            });
        }
        if rewards.len() > u16::MAX as usize {
            return Err(Error::BadParams {
                what: "reward list is too large".into(),
            });
        }
        let one = S::one();
        for r in &rewards {
            if r.abs() > one {
                return Err(Error::BadParams {
                    what: format!("reward {r} lies outside [-1, 1]"),
                });
            }
        }
        for (i, r) in rewards.iter().enumerate() {
            if rewards[..i].contains(r) {
                return Err(Error::BadParams {
                    what: format!("duplicate reward value {r}"),
                });
            }
        }
        let reward_names: Vec<String> = rewards.iter().map(|r| r.to_string()).collect();
        check_distinct(&reward_names, "reward")?;
        let negation = rewards
            .iter()
            .map(|r| {
                let neg = -r.clone();
                rewards
                    .iter()
                    .position(|x| *x == neg)
                    .map(|j| RewardId(j as u16))
            })
            .collect::<Option<Vec<_>>>();
        let zero_reward = rewards
            .iter()
            .position(|r| r.is_zero())
            .map(|i| RewardId(i as u16));
        let max_abs_reward = rewards
            .iter()
            .map(|r| r.abs())
            .fold(S::zero(), |a, b| if b > a { b } else { a });
        Ok(Spaces {
            actions,
            observations,
            rewards,
            reward_names,
            negation,
            zero_reward,
            max_abs_reward,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_rewards(&self) -> usize {
        self.rewards.len()
    }

    /// Number of percepts, observations times rewards.
    pub fn num_percepts(&self) -> usize {
        self.observations.len() * self.rewards.len()
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len() as u16).map(ActionId)
    }

    pub fn percepts(&self) -> impl Iterator<Item = Percept> {
        let no = self.observations.len() as u16;
        let nr = self.rewards.len() as u16;
        (0..no).flat_map(move |o| {
            (0..nr).map(move |r| Percept {
                obs: ObsId(o),
                reward: RewardId(r),
            })
        })
    }

    /// Position of a percept in the canonical row-major enumeration.
    pub fn percept_index(&self, p: Percept) -> usize {
        p.obs.index() * self.rewards.len() + p.reward.index()
    }

    /// Percept at a canonical enumeration position.
    pub fn percept_at(&self, index: usize) -> Percept {
        debug_assert!(index < self.num_percepts());
        Percept {
            obs: ObsId((index / self.rewards.len()) as u16),
            reward: RewardId((index % self.rewards.len()) as u16),
        }
    }

    pub fn action_name(&self, id: ActionId) -> &str {
        &self.actions[id.index()]
    }

    pub fn observation_name(&self, id: ObsId) -> &str {
        &self.observations[id.index()]
    }

    pub fn reward_value(&self, id: RewardId) -> &S {
        &self.rewards[id.index()]
    }

    pub fn reward_name(&self, id: RewardId) -> &str {
        &self.reward_names[id.index()]
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.actions
            .iter()
            .position(|a| a == name)
            .map(|i| ActionId(i as u16))
    }

    pub fn observation_by_name(&self, name: &str) -> Option<ObsId> {
        self.observations
            .iter()
            .position(|o| o == name)
            .map(|i| ObsId(i as u16))
    }

    pub fn reward_by_name(&self, name: &str) -> Option<RewardId> {
        self.reward_names
            .iter()
            .position(|r| r == name)
            .map(|i| RewardId(i as u16))
    }

    pub fn reward_by_value(&self, value: &S) -> Option<RewardId> {
        self.rewards
            .iter()
            .position(|r| r == value)
            .map(|i| RewardId(i as u16))
    }

    /// True when every reward's negation is itself a reward.
    pub fn is_negation_closed(&self) -> bool {
        self.negation.is_some()
    }

    /// True when 0 is a reward.
    pub fn contains_zero(&self) -> bool {
        self.zero_reward.is_some()
    }

    pub fn zero_reward(&self) -> Option<RewardId> {
        self.zero_reward
    }

    /// Canonical inert percept: the first observation paired with reward
    /// zero. Errors when 0 is not a reward.
    pub fn quiet_percept(&self) -> Result<Percept> {
        match self.zero_reward {
            Some(reward) => Ok(Percept {
                obs: ObsId(0),
                reward,
            }),
            None => Err(Error::ZeroRewardRequired),
        }
    }

    /// Largest absolute reward value.
    pub fn max_abs_reward(&self) -> &S {
        &self.max_abs_reward
    }

    /// Reward id of the negated value; requires negation closure.
    pub fn negate_reward(&self, id: RewardId) -> Result<RewardId> {
        match &self.negation {
            Some(table) => Ok(table[id.index()]),
            None => Err(Error::RewardsNotNegationClosed),
        }
    }

    /// The percept with the negated reward; requires negation closure.
    pub fn negate_percept(&self, p: Percept) -> Result<Percept> {
        Ok(Percept {
            obs: p.obs,
            reward: self.negate_reward(p.reward)?,
        })
    }

    pub(crate) fn check_item(&self, item: Item) -> Result<()> {
        match item {
            Item::Action(a) => {
                if a.index() < self.actions.len() {
                    Ok(())
                } else {
                    Err(Error::SymbolOutOfSpace {
                        what: format!("action index {}", a.index()),
                    })
                }
            }
            Item::Percept(p) => {
                if p.obs.index() < self.observations.len() && p.reward.index() < self.rewards.len()
                {
                    Ok(())
                } else {
                    Err(Error::SymbolOutOfSpace {
                        what: format!(
                            "percept index ({}, {})",
                            p.obs.index(),
                            p.reward.index()
                        ),
                    })
                }
            }
        }
    }

    pub(crate) fn check_history(&self, h: &History) -> Result<()> {
        for &item in h.items() {
            self.check_item(item)?;
        }
        Ok(())
    }

    /// Canonical text for a percept: `(obs,reward)`.
    pub fn percept_text(&self, p: Percept) -> String {
        format!(
            "({},{})",
            self.observation_name(p.obs),
            self.reward_name(p.reward)
        )
    }

    /// Parses the canonical percept form `(obs,reward)`.
    pub fn parse_percept(&self, text: &str) -> Result<Percept> {
        let inner = text
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse {
                what: format!("percept {text:?} is not of the form (obs,reward)"),
            })?;
        let (obs, reward) = inner.split_once(',').ok_or_else(|| Error::Parse {
            what: format!("percept {text:?} lacks a comma"),
        })?;
        let obs = self
            .observation_by_name(obs.trim())
            .ok_or_else(|| Error::SymbolOutOfSpace {
                what: format!("observation {:?}", obs.trim()),
            })?;
        let reward = self
            .reward_by_name(reward.trim())
            .ok_or_else(|| Error::SymbolOutOfSpace {
                what: format!("reward {:?}", reward.trim()),
            })?;
        Ok(Percept { obs, reward })
    }

    /// Canonical text for a history: whitespace-separated items, percepts in
    /// parentheses, actions bare. The empty history renders as "".
    pub fn history_text(&self, h: &History) -> String {
        let mut out = String::new();
        for &item in h.items() {
            if !out.is_empty() {
                out.push(' ');
            }
            match item {
                Item::Percept(p) => out.push_str(&self.percept_text(p)),
                Item::Action(a) => out.push_str(self.action_name(a)),
            }
        }
        out
    }

    /// Parses the canonical history form, validating grammar and symbols.
    pub fn parse_history(&self, text: &str) -> Result<History> {
        let mut h = History::empty();
        for token in text.split_whitespace() {
            let item = if token.starts_with('(') {
                Item::Percept(self.parse_percept(token)?)
            } else {
                Item::Action(self.action_by_name(token).ok_or_else(|| {
                    Error::SymbolOutOfSpace {
                        what: format!("action {token:?}"),
                    }
                })?)
            };
            h = h.append(self, item)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, Rational};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn small() -> Spaces<Rational> {
        Spaces::new(
            names(&["a", "b"]),
            names(&["o"]),
            vec![rat(-1, 1), rat(0, 1), rat(1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn computes_negation_and_zero_flags() {
        let s = small();
        assert!(s.is_negation_closed());
        assert!(s.contains_zero());
        assert_eq!(s.max_abs_reward(), &rat(1, 1));
        let minus = s.reward_by_value(&rat(-1, 1)).unwrap();
        let plus = s.reward_by_value(&rat(1, 1)).unwrap();
        assert_eq!(s.negate_reward(minus).unwrap(), plus);
        let zero = s.zero_reward().unwrap();
        assert_eq!(s.negate_reward(zero).unwrap(), zero);
    }

    #[test]
    fn negation_closure_fails_without_partner() {
        let s = Spaces::new(names(&["a"]), names(&["o"]), vec![rat(0, 1), rat(1, 2)]).unwrap();
        assert!(!s.is_negation_closed());
        let half = s.reward_by_value(&rat(1, 2)).unwrap();
        assert_eq!(
            s.negate_reward(half),
            Err(Error::RewardsNotNegationClosed)
        );
    }

    #[test]
    fn rejects_out_of_range_rewards_and_duplicates() {
        let err = Spaces::<Rational>::new(names(&["a"]), names(&["o"]), vec![rat(3, 2)]);
        assert!(matches!(err, Err(Error::BadParams { .. })));
        let err = Spaces::<Rational>::new(names(&["a", "a"]), names(&["o"]), vec![rat(0, 1)]);
        assert!(matches!(err, Err(Error::BadParams { .. })));
    }

    #[test]
    fn rejects_symbols_that_break_the_text_encoding() {
        for bad in ["", "two words", "pa(ren", "com,ma", "qu\"ote"] {
            let err = Spaces::<Rational>::new(names(&[bad]), names(&["o"]), vec![rat(0, 1)]);
            assert!(matches!(err, Err(Error::BadParams { .. })), "{bad:?}");
        }
    }

    #[test]
    fn percept_enumeration_is_row_major_and_stable() {
        let s = Spaces::new(
            names(&["a"]),
            names(&["x", "y"]),
            vec![rat(0, 1), rat(1, 1)],
        )
        .unwrap();
        let all: Vec<_> = s.percepts().collect();
        assert_eq!(all.len(), 4);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(s.percept_index(*p), i);
            assert_eq!(s.percept_at(i), *p);
        }
        assert_eq!(s.percept_text(all[1]), "(x,1)");
    }

    #[test]
    fn percept_text_round_trips() {
        let s = small();
        for p in s.percepts() {
            assert_eq!(s.parse_percept(&s.percept_text(p)).unwrap(), p);
        }
        assert!(s.parse_percept("(o,1/2)").is_err());
        assert!(s.parse_percept("o,1").is_err());
    }
}
