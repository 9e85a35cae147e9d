//! Exact expected-reward evaluation to a finite step count, plus weighted
//! aggregates of values across families of environments.

use crate::agents::Agent;
use crate::environments::{certify_strongly_well_behaved, Env};
use crate::error::{Error, Result};
use crate::history::{History, Item};
use crate::scalar::Scalar;
use crate::spaces::Spaces;

/// Evaluation limits.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Maximum number of expanded tree nodes before evaluation refuses.
    pub max_nodes: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_nodes: 10_000_000,
        }
    }
}

/// An exact value together with the environment's declared bound on what can
/// still arrive after step `t` (when the environment provides one).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueResult<S: Scalar> {
    pub value: S,
    pub tail: Option<S>,
    pub t: usize,
}

struct Walker<'a, S: Scalar> {
    spaces: &'a Spaces<S>,
    agent: &'a Agent<S>,
    env: &'a Env<S>,
    budget: u64,
    used: u64,
    /// `per_step[k]` accumulates the expected reward of step `k + 1`.
    per_step: Vec<S>,
}

impl<S: Scalar> Walker<'_, S> {
    fn walk(&mut self, h: &mut History, weight: S, steps_done: usize) -> Result<()> {
        let t = self.per_step.len();
        if steps_done == t {
            return Ok(());
        }
        self.used += 1;
        if self.used > self.budget {
            return Err(Error::DepthOverflow {
                budget: self.budget,
            });
        }
        let d = self.env.chances_raw(self.spaces, h)?;
        for (idx, m) in d.masses().iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let x = self.spaces.percept_at(idx);
            let w = weight.clone() * m.clone();
            let r = self.spaces.reward_value(x.reward);
            if !r.is_zero() {
                self.per_step[steps_done] =
                    self.per_step[steps_done].clone() + w.clone() * r.clone();
            }
            if steps_done + 1 < t {
                h.push(Item::Percept(x));
                let a = self.agent.act_raw(self.spaces, h)?;
                for y in self.spaces.action_ids() {
                    let am = a.mass(y.index());
                    if am.is_zero() {
                        continue;
                    }
                    h.push(Item::Action(y));
                    self.walk(h, w.clone() * am.clone(), steps_done + 1)?;
                    h.pop();
                }
                h.pop();
            }
        }
        Ok(())
    }
}

/// Expected cumulative rewards `V_0, V_1, ..., V_t` in one traversal:
/// entry `k` is the expected sum of the first `k` rewards.
pub fn value_profile<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
    options: &EvalOptions,
) -> Result<Vec<S>> {
    let mut walker = Walker {
        spaces,
        agent,
        env,
        budget: options.max_nodes,
        used: 0,
        per_step: vec![S::zero(); t],
    };
    if t > 0 {
        walker.walk(&mut History::empty(), S::one(), 0)?;
    }
    let mut profile = Vec::with_capacity(t + 1);
    let mut acc = S::zero();
    profile.push(acc.clone());
    for step in walker.per_step {
        acc = acc + step;
        profile.push(acc.clone());
    }
    Ok(profile)
}

/// [`value_profile`] with default options.
pub fn value_vector<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<Vec<S>> {
    value_profile(spaces, agent, env, t, &EvalOptions::default())
}

/// Expected cumulative reward after `t` steps, with the tail bound at `t`.
pub fn value_at_with<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
    options: &EvalOptions,
) -> Result<ValueResult<S>> {
    let profile = value_profile(spaces, agent, env, t, options)?;
    Ok(ValueResult {
        value: profile[t].clone(),
        tail: env.tail_bound(spaces).map(|b| b.at(t)),
        t,
    })
}

/// [`value_at_with`] with default options.
pub fn value_at<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<ValueResult<S>> {
    value_at_with(spaces, agent, env, t, &EvalOptions::default())
}

/// The interval certainly containing every later partial value: the value at
/// `t` widened by the tail bound. Errors when no bound is declared.
pub fn value_interval<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<(S, S)> {
    let r = value_at(spaces, agent, env, t)?;
    let tail = r.tail.ok_or(Error::NoTailBound)?;
    Ok((r.value.clone() - tail.clone(), r.value + tail))
}

/// A finite family of environments with positive weights: the induced score
/// of an agent is the weighted sum of its values in each environment.
#[derive(Clone, Debug)]
pub struct WeightedMeasure<S: Scalar> {
    entries: Vec<(S, Env<S>)>,
}

impl<S: Scalar> WeightedMeasure<S> {
    /// Weights must be positive; their sum may be at most 1, with any
    /// remainder understood as inert.
    pub fn new(entries: Vec<(S, Env<S>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidWeights {
                reason: "measure has no components".into(),
            });
        }
        let mut sum = S::zero();
        for (i, (w, _)) in entries.iter().enumerate() {
            if *w <= S::zero() {
                return Err(Error::InvalidWeights {
                    reason: format!("measure weight {i} is not positive"),
                });
            }
            sum = sum + w.clone();
        }
        if sum > S::one() {
            return Err(Error::MeasureNotNormalized {
                sum: format!("{sum}"),
            });
        }
        Ok(WeightedMeasure { entries })
    }

    pub fn entries(&self) -> &[(S, Env<S>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight_sum(&self) -> S {
        let mut sum = S::zero();
        for (w, _) in &self.entries {
            sum = sum + w.clone();
        }
        sum
    }

    /// True when the weights sum exactly to 1.
    pub fn is_normalized(&self) -> bool {
        self.weight_sum() == S::one()
    }

    /// Certifies that every component environment keeps all agents' values
    /// within `[-1, 1]`; see
    /// [`certify_strongly_well_behaved`].
    pub fn certify(&self, spaces: &Spaces<S>, depth: usize) -> Result<bool> {
        for (_, env) in &self.entries {
            if !certify_strongly_well_behaved(spaces, env, depth)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Weighted tail bound at `t`, when every component declares one.
    pub fn tail(&self, spaces: &Spaces<S>, t: usize) -> Option<S> {
        let mut total = S::zero();
        for (w, env) in &self.entries {
            total = total + w.clone() * env.tail_bound(spaces)?.at(t);
        }
        Some(total)
    }
}

/// Weighted score of an agent under a measure after `t` steps.
pub fn upsilon<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    agent: &Agent<S>,
    t: usize,
) -> Result<ValueResult<S>> {
    let mut value = S::zero();
    for (w, env) in measure.entries() {
        value = value + w.clone() * value_at(spaces, agent, env, t)?.value;
    }
    Ok(ValueResult {
        value,
        tail: measure.tail(spaces, t),
        t,
    })
}

/// Weighted score profile `0, Y_1, ..., Y_t` matching [`value_profile`].
pub fn upsilon_vector<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    agent: &Agent<S>,
    t: usize,
) -> Result<Vec<S>> {
    let mut profile = vec![S::zero(); t + 1];
    for (w, env) in measure.entries() {
        let v = value_vector(spaces, agent, env, t)?;
        for (slot, x) in profile.iter_mut().zip(v.into_iter()) {
            *slot = slot.clone() + w.clone() * x;
        }
    }
    Ok(profile)
}
