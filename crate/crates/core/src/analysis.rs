//! Executable law checkers and probes. Each function verifies one identity
//! or construction with exact arithmetic over a bounded-depth history tree
//! and reports either a pass or the first concrete counterexample found.

use crate::agents::Agent;
use crate::dist::Dist;
use crate::environments::Env;
use crate::error::{Error, Result};
use crate::history::{History, Item, Parity};
use crate::mixtures::{
    distance_up_to, dual_agent, mix_agents, patch_agent, self_dual_up_to, symmetrize,
    WeightVector,
};
use crate::scalar::{from_ratio, Scalar};
use crate::spaces::Spaces;
use crate::valuation::{upsilon, value_vector, WeightedMeasure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NODE_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// The first witness of a violated identity: where it happened and the two
/// values that should have been equal (or ordered) but were not.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<S: Scalar> {
    pub location: String,
    pub left: S,
    pub right: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport<S: Scalar> {
    pub check_name: String,
    pub verdict: Verdict,
    pub depth: usize,
    pub counterexample: Option<Counterexample<S>>,
    pub notes: Vec<String>,
}

impl<S: Scalar> CheckReport<S> {
    fn from_outcome(name: &str, depth: usize, cex: Option<Counterexample<S>>) -> Self {
        CheckReport {
            check_name: name.into(),
            verdict: if cex.is_some() {
                Verdict::Fail
            } else {
                Verdict::Pass
            },
            depth,
            counterexample: cex,
            notes: Vec::new(),
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.notes.push(note);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Closed interval spanned by a finite set of exact values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueRange<S: Scalar> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> ValueRange<S> {
    fn spanning(values: &[S]) -> Self {
        let mut lo = values[0].clone();
        let mut hi = values[0].clone();
        for v in &values[1..] {
            if *v < lo {
                lo = v.clone();
            }
            if *v > hi {
                hi = v.clone();
            }
        }
        ValueRange { lo, hi }
    }

    pub fn disjoint_from(&self, other: &ValueRange<S>) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

fn cex<S: Scalar>(location: String, left: S, right: S) -> Option<Counterexample<S>> {
    Some(Counterexample {
        location,
        left,
        right,
    })
}

fn dot<S: Scalar>(weights: &[S], values: &[S]) -> S {
    let mut total = S::zero();
    for (w, v) in weights.iter().zip(values.iter()) {
        if !w.is_zero() && !v.is_zero() {
            total = total + w.clone() * v.clone();
        }
    }
    total
}

struct MixtureWalk<'a, S: Scalar> {
    spaces: &'a Spaces<S>,
    mixture: &'a Agent<S>,
    weights: &'a [S],
    components: &'a [Agent<S>],
    env: &'a Env<S>,
    t: usize,
    used: u64,
    /// Expected reward of step `k + 1` under the mixture and each component.
    step_mix: Vec<S>,
    step_comp: Vec<Vec<S>>,
}

impl<S: Scalar> MixtureWalk<'_, S> {
    /// Visits `h` carrying the action-only products `p` and joint products
    /// `pj` for the mixture and every component; returns the first violation.
    #[allow(clippy::too_many_arguments)]
    fn visit(
        &mut self,
        h: &mut History,
        p_mix: S,
        p_comp: Vec<S>,
        pj_mix: S,
        pj_comp: Vec<S>,
    ) -> Result<Option<Counterexample<S>>> {
        self.used += 1;
        if self.used > NODE_BUDGET {
            return Err(Error::DepthOverflow {
                budget: NODE_BUDGET,
            });
        }
        let wanted = dot(self.weights, &p_comp);
        if p_mix != wanted {
            return Ok(cex(
                format!(
                    "action-weight sum at \"{}\"",
                    self.spaces.history_text(h)
                ),
                p_mix,
                wanted,
            ));
        }
        let wanted_joint = dot(self.weights, &pj_comp);
        if pj_mix != wanted_joint {
            return Ok(cex(
                format!("joint-weight sum at \"{}\"", self.spaces.history_text(h)),
                pj_mix,
                wanted_joint,
            ));
        }
        if h.len() == 2 * self.t {
            return Ok(None);
        }
        if h.parity() == Parity::EndsInPercept {
            let d_mix = self.mixture.act_raw(self.spaces, h)?;
            if let Some(c) = self.check_definition(h, &p_comp, &d_mix)? {
                return Ok(Some(c));
            }
            let mut d_comp = Vec::with_capacity(self.components.len());
            for (i, comp) in self.components.iter().enumerate() {
                if p_comp[i].is_zero() {
                    d_comp.push(None);
                } else {
                    d_comp.push(Some(comp.act_raw(self.spaces, h)?));
                }
            }
            for y in self.spaces.action_ids() {
                let mm = d_mix.mass(y.index());
                let cp_mix = p_mix.clone() * mm.clone();
                let cpj_mix = pj_mix.clone() * mm.clone();
                let mut cp_comp = Vec::with_capacity(p_comp.len());
                let mut cpj_comp = Vec::with_capacity(p_comp.len());
                for i in 0..p_comp.len() {
                    match &d_comp[i] {
                        Some(d) => {
                            let cm = d.mass(y.index());
                            cp_comp.push(p_comp[i].clone() * cm.clone());
                            cpj_comp.push(pj_comp[i].clone() * cm.clone());
                        }
                        None => {
                            cp_comp.push(S::zero());
                            cpj_comp.push(S::zero());
                        }
                    }
                }
                h.push(Item::Action(y));
                let outcome = if cp_mix.is_zero() && cp_comp.iter().all(|p| p.is_zero()) {
                    self.probe_dead_posterior(h)
                } else {
                    self.visit(h, cp_mix, cp_comp, cpj_mix, cpj_comp)
                };
                let outcome = outcome?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        } else {
            let d_env = self.env.chances_raw(self.spaces, h)?;
            let level = h.percept_count();
            for (idx, m) in d_env.masses().iter().enumerate() {
                if m.is_zero() {
                    continue;
                }
                let x = self.spaces.percept_at(idx);
                let r = self.spaces.reward_value(x.reward);
                let cpj_mix = pj_mix.clone() * m.clone();
                let cpj_comp: Vec<S> =
                    pj_comp.iter().map(|p| p.clone() * m.clone()).collect();
                if !r.is_zero() {
                    self.step_mix[level] =
                        self.step_mix[level].clone() + cpj_mix.clone() * r.clone();
                    for (i, pj) in cpj_comp.iter().enumerate() {
                        self.step_comp[i][level] =
                            self.step_comp[i][level].clone() + pj.clone() * r.clone();
                    }
                }
                h.push(Item::Percept(x));
                let outcome =
                    self.visit(h, p_mix.clone(), p_comp.clone(), cpj_mix, cpj_comp)?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        }
        Ok(None)
    }

    /// The defining formula for the mixture's action distribution, checked
    /// with cross-multiplication so no division is needed: where the weighted
    /// component masses vanish the mixture must answer uniformly, elsewhere
    /// `mass(y) * den` must equal the weighted component numerator.
    fn check_definition(
        &self,
        h: &History,
        p_comp: &[S],
        d_mix: &Dist<S>,
    ) -> Result<Option<Counterexample<S>>> {
        let mut mass_sum = S::zero();
        for m in d_mix.masses() {
            mass_sum = mass_sum + m.clone();
        }
        if mass_sum != S::one() {
            return Ok(cex(
                format!(
                    "mixture answer not a distribution at \"{}\"",
                    self.spaces.history_text(h)
                ),
                mass_sum,
                S::one(),
            ));
        }
        let den = dot(self.weights, p_comp);
        if den.is_zero() {
            let n = self.spaces.num_actions();
            let uniform = from_ratio::<S>(1, n as i64);
            for y in 0..n {
                if *d_mix.mass(y) != uniform {
                    return Ok(cex(
                        format!(
                            "fallback at dead history \"{}\"",
                            self.spaces.history_text(h)
                        ),
                        d_mix.mass(y).clone(),
                        uniform,
                    ));
                }
            }
            return Ok(None);
        }
        for y in self.spaces.action_ids() {
            let mut numer = S::zero();
            for (i, comp) in self.components.iter().enumerate() {
                if p_comp[i].is_zero() || self.weights[i].is_zero() {
                    continue;
                }
                let a = comp.act_raw(self.spaces, h)?;
                numer = numer
                    + self.weights[i].clone()
                        * p_comp[i].clone()
                        * a.mass(y.index()).clone();
            }
            let lhs = d_mix.mass(y.index()).clone() * den.clone();
            if lhs != numer {
                return Ok(cex(
                    format!(
                        "definition of action {} at \"{}\"",
                        self.spaces.action_name(y),
                        self.spaces.history_text(h)
                    ),
                    lhs,
                    numer,
                ));
            }
        }
        Ok(None)
    }

    /// Every component weight is zero below `h`, so the identities hold
    /// trivially there; instead of expanding the whole subtree, walk one
    /// representative path and insist the mixture answers uniformly along it.
    fn probe_dead_posterior(&mut self, h: &mut History) -> Result<Option<Counterexample<S>>> {
        let n = self.spaces.num_actions();
        let uniform = Dist::uniform(n);
        let mut pushed = 0usize;
        let mut outcome = None;
        while h.len() < 2 * self.t {
            match h.parity() {
                Parity::EndsInPercept => {
                    let d = self.mixture.act_raw(self.spaces, h)?;
                    if d != uniform {
                        let y = (0..n)
                            .find(|&y| d.mass(y) != uniform.mass(y))
                            .expect("some mass differs");
                        outcome = cex(
                            format!(
                                "fallback at dead history \"{}\"",
                                self.spaces.history_text(h)
                            ),
                            d.mass(y).clone(),
                            uniform.mass(y).clone(),
                        );
                        break;
                    }
                    h.push(Item::Action(
                        self.spaces.action_ids().next().expect("actions nonempty"),
                    ));
                }
                _ => {
                    let d = self.env.chances_raw(self.spaces, h)?;
                    let idx = (0..d.len())
                        .find(|&i| !d.mass(i).is_zero())
                        .expect("distributions have support");
                    h.push(Item::Percept(self.spaces.percept_at(idx)));
                }
            }
            pushed += 1;
        }
        for _ in 0..pushed {
            h.pop();
        }
        Ok(outcome)
    }
}

/// Verifies a mixture agent against its claimed weights and components over
/// every history of length at most `2t`:
///
/// * the mixture's action-weight of each history equals the weighted sum of
///   component action-weights;
/// * the same with the environment folded in;
/// * expected cumulative rewards agree with the weighted component values at
///   every step count up to `t`;
/// * at each history where the mixture acts, its answer matches the defining
///   formula, including the uniform fallback where all component weights die;
/// * partial values respect the environment's tail bound when one is
///   declared.
pub fn check_mixture_laws_with<S: Scalar>(
    spaces: &Spaces<S>,
    mixture: &Agent<S>,
    weights: &[S],
    components: &[Agent<S>],
    env: &Env<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    if weights.len() != components.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: components.len(),
        });
    }
    let n = components.len();
    let mut walk = MixtureWalk {
        spaces,
        mixture,
        weights,
        components,
        env,
        t,
        used: 0,
        step_mix: vec![S::zero(); t],
        step_comp: vec![vec![S::zero(); t]; n],
    };
    let mut outcome = walk.visit(
        &mut History::empty(),
        S::one(),
        vec![S::one(); n],
        S::one(),
        vec![S::one(); n],
    )?;
    let mut v_mix = vec![S::zero()];
    let mut v_comp = vec![vec![S::zero()]; n];
    for k in 0..t {
        let prev = v_mix[k].clone();
        v_mix.push(prev + walk.step_mix[k].clone());
        for i in 0..n {
            let prev = v_comp[i][k].clone();
            v_comp[i].push(prev + walk.step_comp[i][k].clone());
        }
    }
    if outcome.is_none() {
        for k in 0..=t {
            let parts: Vec<S> = (0..n).map(|i| v_comp[i][k].clone()).collect();
            let wanted = dot(weights, &parts);
            if v_mix[k] != wanted {
                outcome = cex(
                    format!("expected reward after {k} steps"),
                    v_mix[k].clone(),
                    wanted,
                );
                break;
            }
        }
    }
    if outcome.is_none() {
        if let Some(bound) = env.tail_bound(spaces) {
            'tail: for hi in 1..=t {
                for lo in 0..hi {
                    let drift = (v_mix[hi].clone() - v_mix[lo].clone()).abs();
                    let allowed = bound.at(lo) + bound.at(hi);
                    if drift > allowed {
                        outcome = cex(
                            format!(
                                "declared tail bound between steps {lo} and {hi}"
                            ),
                            drift,
                            allowed,
                        );
                        break 'tail;
                    }
                }
            }
        }
    }
    Ok(CheckReport::from_outcome("mixture_laws", t, outcome)
        .with_note(format!("histories expanded: {}", walk.used)))
}

/// [`check_mixture_laws_with`] on the mixture built from the given weights
/// and components by [`mix_agents`].
pub fn check_mixture_laws<S: Scalar>(
    spaces: &Spaces<S>,
    weights: &WeightVector<S>,
    components: &[Agent<S>],
    env: &Env<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let mixture = mix_agents(weights.clone(), components.to_vec())?;
    check_mixture_laws_with(spaces, &mixture, weights.weights(), components, env, t)
}

fn require_finite_horizon<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    t: usize,
) -> Result<()> {
    match measure.tail(spaces, t) {
        Some(tail) if tail.is_zero() => Ok(()),
        _ => Err(Error::NoFiniteHorizon {
            what: format!("measure tail does not vanish at depth {t}"),
        }),
    }
}

/// On a measure whose tail vanishes at `t` (so scores are exact limits),
/// verifies that the score of a mixture equals the weighted sum of the
/// component scores.
pub fn check_measure_linearity<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    weights: &WeightVector<S>,
    components: &[Agent<S>],
    t: usize,
) -> Result<CheckReport<S>> {
    require_finite_horizon(spaces, measure, t)?;
    let mixture = mix_agents(weights.clone(), components.to_vec())?;
    let whole = upsilon(spaces, measure, &mixture, t)?.value;
    let mut parts = Vec::with_capacity(components.len());
    for comp in components {
        parts.push(upsilon(spaces, measure, comp, t)?.value);
    }
    let wanted = dot(weights.weights(), &parts);
    let outcome = if whole == wanted {
        None
    } else {
        cex("score of the mixture".into(), whole, wanted)
    };
    Ok(CheckReport::from_outcome("measure_linearity", t, outcome))
}

struct FactorWalk<'a, S: Scalar> {
    spaces: &'a Spaces<S>,
    agent: &'a Agent<S>,
    env: &'a Env<S>,
    t: usize,
    used: u64,
    level_mass: Vec<S>,
}

impl<S: Scalar> FactorWalk<'_, S> {
    fn visit(
        &mut self,
        h: &mut History,
        p_agent: S,
        p_env: S,
        p_joint: S,
    ) -> Result<Option<Counterexample<S>>> {
        self.used += 1;
        if self.used > NODE_BUDGET {
            return Err(Error::DepthOverflow {
                budget: NODE_BUDGET,
            });
        }
        let product = p_agent.clone() * p_env.clone();
        if p_joint != product {
            return Ok(cex(
                format!("factorization at \"{}\"", self.spaces.history_text(h)),
                p_joint,
                product,
            ));
        }
        if h.len() % 2 == 0 {
            let step = h.len() / 2;
            self.level_mass[step] = self.level_mass[step].clone() + p_joint.clone();
        }
        if h.len() == 2 * self.t || p_joint.is_zero() {
            return Ok(None);
        }
        if h.parity() == Parity::EndsInPercept {
            let d = self.agent.act_raw(self.spaces, h)?;
            for y in self.spaces.action_ids() {
                let m = d.mass(y.index());
                h.push(Item::Action(y));
                let outcome = self.visit(
                    h,
                    p_agent.clone() * m.clone(),
                    p_env.clone(),
                    p_joint.clone() * m.clone(),
                )?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        } else {
            let d = self.env.chances_raw(self.spaces, h)?;
            for (idx, m) in d.masses().iter().enumerate() {
                let x = self.spaces.percept_at(idx);
                h.push(Item::Percept(x));
                let outcome = self.visit(
                    h,
                    p_agent.clone(),
                    p_env.clone() * m.clone(),
                    p_joint.clone() * m.clone(),
                )?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        }
        Ok(None)
    }
}

/// Verifies that the joint weight of every history of length at most `2t`
/// equals the product of the agent-only and environment-only weights, and
/// that the joint weights of the full-length histories at every step count
/// sum to exactly 1.
///
/// Subtrees of joint weight zero are not expanded: every deeper history
/// keeps joint weight zero and a zero factor on the product side, so the
/// identity holds there by construction.
pub fn check_factorization<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let mut walk = FactorWalk {
        spaces,
        agent,
        env,
        t,
        used: 0,
        level_mass: vec![S::zero(); t + 1],
    };
    let mut outcome = walk.visit(&mut History::empty(), S::one(), S::one(), S::one())?;
    if outcome.is_none() {
        for (step, mass) in walk.level_mass.iter().enumerate() {
            if *mass != S::one() {
                outcome = cex(
                    format!("total weight of step-{step} histories"),
                    mass.clone(),
                    S::one(),
                );
                break;
            }
        }
    }
    Ok(CheckReport::from_outcome("factorization", t, outcome)
        .with_note(format!("histories expanded: {}", walk.used)))
}

/// Verifies that the agent's action-weight of every reward-reversed history
/// equals the claimed dual's action-weight of the history itself, over all
/// histories of length at most `2t`.
pub fn check_dual_commutation<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    claimed_dual: &Agent<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let mut outcome = None;
    for h in crate::reference::histories_up_to(spaces, 2 * t) {
        let left = agent.prob(spaces, &h.dual(spaces)?)?;
        let right = claimed_dual.prob(spaces, &h)?;
        if left != right {
            outcome = cex(
                format!("commutation at \"{}\"", spaces.history_text(&h)),
                left,
                right,
            );
            break;
        }
    }
    Ok(CheckReport::from_outcome("dual_commutation", t, outcome))
}

/// The duality suite for one agent: taking the dual twice restores the
/// original, action-weights commute with reward reversal, and the
/// symmetrized agent is its own dual. All checks are pointwise over
/// histories with at most `t` percepts.
pub fn check_duality<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let dual = dual_agent(spaces, agent)?;
    let twice = dual_agent(spaces, &dual)?;
    let mut outcome = None;
    for h in crate::reference::act_sites(spaces, t) {
        let original = agent.act(spaces, &h)?;
        let restored = twice.act(spaces, &h)?;
        if original != restored {
            let y = (0..original.len())
                .find(|&y| original.mass(y) != restored.mass(y))
                .expect("some mass differs");
            outcome = cex(
                format!("double dual at \"{}\"", spaces.history_text(&h)),
                restored.mass(y).clone(),
                original.mass(y).clone(),
            );
            break;
        }
    }
    if outcome.is_none() {
        let commutation = check_dual_commutation(spaces, agent, &dual, t)?;
        outcome = commutation.counterexample;
    }
    if outcome.is_none() {
        let sym = symmetrize(spaces, agent)?;
        let sym_dual = dual_agent(spaces, &sym)?;
        for h in crate::reference::act_sites(spaces, t) {
            let a = sym.act(spaces, &h)?;
            let b = sym_dual.act(spaces, &h)?;
            if a != b {
                let y = (0..a.len())
                    .find(|&y| a.mass(y) != b.mass(y))
                    .expect("some mass differs");
                outcome = cex(
                    format!(
                        "symmetrized self-duality at \"{}\"",
                        spaces.history_text(&h)
                    ),
                    a.mass(y).clone(),
                    b.mass(y).clone(),
                );
                break;
            }
        }
    }
    Ok(CheckReport::from_outcome("duality", t, outcome))
}

/// Verifies that a mixture of identical copies of an agent is equivalent to
/// the agent: the same histories carry weight zero, and wherever the weight
/// is positive the two act identically.
pub fn check_self_mixture<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    weights: &WeightVector<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let copies = vec![agent.clone(); weights.len()];
    let mixture = mix_agents(weights.clone(), copies)?;
    let mut outcome = None;
    for h in crate::reference::histories_up_to(spaces, 2 * t) {
        let pa = agent.prob(spaces, &h)?;
        let pm = mixture.prob(spaces, &h)?;
        if pa.is_zero() != pm.is_zero() {
            outcome = cex(
                format!("weight support at \"{}\"", spaces.history_text(&h)),
                pm,
                pa,
            );
            break;
        }
        if !pa.is_zero() && h.parity() == Parity::EndsInPercept {
            let da = agent.act(spaces, &h)?;
            let dm = mixture.act(spaces, &h)?;
            if da != dm {
                let y = (0..da.len())
                    .find(|&y| da.mass(y) != dm.mass(y))
                    .expect("some mass differs");
                outcome = cex(
                    format!("behavior at \"{}\"", spaces.history_text(&h)),
                    dm.mass(y).clone(),
                    da.mass(y).clone(),
                );
                break;
            }
        }
    }
    Ok(CheckReport::from_outcome("self_mixture", t, outcome))
}

/// Verifies that dualizing both the agent and the environment negates the
/// expected cumulative reward at every step count up to `t`.
pub fn check_value_duality<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    env: &Env<S>,
    t: usize,
) -> Result<CheckReport<S>> {
    let dual = dual_agent(spaces, agent)?;
    let denv = crate::envmix::env_dual(spaces, env)?;
    let original = value_vector(spaces, agent, env, t)?;
    let mirrored = value_vector(spaces, &dual, &denv, t)?;
    let mut outcome = None;
    for k in 0..=t {
        if mirrored[k] != -original[k].clone() {
            outcome = cex(
                format!("negated value after {k} steps"),
                mirrored[k].clone(),
                -original[k].clone(),
            );
            break;
        }
    }
    Ok(CheckReport::from_outcome("value_duality", t, outcome))
}

enum PatchRelation<S: Scalar> {
    /// No action extension of the site is an initial segment of the history.
    Clear,
    /// The history passes through the site taking this action; carries the
    /// base mass at the site and the replacement mass for the action.
    Through { base_at_site: S, repl_at_site: S },
}

struct PatchWalk<'a, S: Scalar> {
    spaces: &'a Spaces<S>,
    base: &'a Agent<S>,
    patched: &'a Agent<S>,
    site: &'a History,
    replacement: &'a Dist<S>,
    depth: usize,
    skipped_dead_site: usize,
}

impl<S: Scalar> PatchWalk<'_, S> {
    fn visit(
        &mut self,
        h: &mut History,
        p_base: S,
        p_patched: S,
        relation: &PatchRelation<S>,
    ) -> Result<Option<Counterexample<S>>> {
        match relation {
            PatchRelation::Clear => {
                if p_patched != p_base {
                    return Ok(cex(
                        format!(
                            "weight away from the site at \"{}\"",
                            self.spaces.history_text(h)
                        ),
                        p_patched,
                        p_base,
                    ));
                }
            }
            PatchRelation::Through {
                base_at_site,
                repl_at_site,
            } => {
                if base_at_site.is_zero() {
                    self.skipped_dead_site += 1;
                } else {
                    let lhs = p_patched.clone() * base_at_site.clone();
                    let rhs = p_base.clone() * repl_at_site.clone();
                    if lhs != rhs {
                        return Ok(cex(
                            format!(
                                "weight through the site at \"{}\"",
                                self.spaces.history_text(h)
                            ),
                            lhs,
                            rhs,
                        ));
                    }
                }
            }
        }
        if h.len() == 2 * self.depth || (p_base.is_zero() && p_patched.is_zero()) {
            return Ok(None);
        }
        if h.parity() == Parity::EndsInPercept {
            let at_site = h == self.site;
            let d_base = self.base.act_raw(self.spaces, h)?;
            let d_patched = self.patched.act_raw(self.spaces, h)?;
            if at_site && d_patched != *self.replacement {
                let y = (0..d_patched.len())
                    .find(|&y| d_patched.mass(y) != self.replacement.mass(y))
                    .expect("some mass differs");
                return Ok(cex(
                    format!(
                        "replacement not installed at \"{}\"",
                        self.spaces.history_text(h)
                    ),
                    d_patched.mass(y).clone(),
                    self.replacement.mass(y).clone(),
                ));
            }
            for y in self.spaces.action_ids() {
                let bm = d_base.mass(y.index()).clone();
                let pm = d_patched.mass(y.index()).clone();
                let child_rel = if at_site {
                    PatchRelation::Through {
                        base_at_site: bm.clone(),
                        repl_at_site: pm.clone(),
                    }
                } else {
                    match relation {
                        PatchRelation::Clear => PatchRelation::Clear,
                        PatchRelation::Through {
                            base_at_site,
                            repl_at_site,
                        } => PatchRelation::Through {
                            base_at_site: base_at_site.clone(),
                            repl_at_site: repl_at_site.clone(),
                        },
                    }
                };
                if at_site {
                    // The direct statement for the one-step extension: the
                    // patched weight of site + action is the base weight of
                    // the site times the replacement mass.
                    let expected = p_base.clone() * pm.clone();
                    let actual = p_patched.clone() * pm.clone();
                    if actual != expected {
                        return Ok(cex(
                            format!(
                                "weight of the patched step at \"{} {}\"",
                                self.spaces.history_text(h),
                                self.spaces.action_name(y)
                            ),
                            actual,
                            expected,
                        ));
                    }
                }
                h.push(Item::Action(y));
                let outcome = self.visit(
                    h,
                    p_base.clone() * bm,
                    p_patched.clone() * pm,
                    &child_rel,
                )?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        } else {
            for x in self.spaces.percepts() {
                h.push(Item::Percept(x));
                let outcome =
                    self.visit(h, p_base.clone(), p_patched.clone(), relation)?;
                h.pop();
                if outcome.is_some() {
                    return Ok(outcome);
                }
            }
        }
        Ok(None)
    }
}

/// Verifies the three action-weight formulas for a single-site patch over
/// every history of length at most `2 * depth`:
///
/// * histories that never extend the site by an action keep their weight;
/// * the one-step extensions of the site get the base site weight times the
///   replacement mass;
/// * histories through the site satisfy the cross-multiplied quotient
///   formula whenever the base agent gave the taken action positive mass
///   (extensions through a zero-mass action are outside the formula's
///   hypothesis and are counted in the notes).
pub fn check_patch_formulas<S: Scalar>(
    spaces: &Spaces<S>,
    agent: &Agent<S>,
    site: &History,
    replacement: &Dist<S>,
    depth: usize,
) -> Result<CheckReport<S>> {
    let patched = patch_agent(spaces, agent, site.clone(), replacement.clone())?;
    let mut walk = PatchWalk {
        spaces,
        base: agent,
        patched: &patched,
        site,
        replacement,
        depth,
        skipped_dead_site: 0,
    };
    let outcome = walk.visit(
        &mut History::empty(),
        S::one(),
        S::one(),
        &PatchRelation::Clear,
    )?;
    let skipped = walk.skipped_dead_site;
    Ok(CheckReport::from_outcome("patch_formulas", depth, outcome)
        .with_note(format!(
            "histories through a zero-mass site action (quotient formula \
             inapplicable): {skipped}"
        )))
}

/// Verifies, on a measure whose tail vanishes at `t`, that replacing an
/// agent by the weighted mixture of its single-site patches leaves the score
/// unchanged, provided the weighted patch distributions average back to the
/// agent's own choice at the site.
pub fn check_patch_decomposition<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    agent: &Agent<S>,
    site: &History,
    weights: &WeightVector<S>,
    replacements: &[Dist<S>],
    t: usize,
) -> Result<CheckReport<S>> {
    require_finite_horizon(spaces, measure, t)?;
    if weights.len() != replacements.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            found: replacements.len(),
        });
    }
    let averaged = crate::mixtures::mix_dists(weights, replacements)?;
    let own = agent.act(spaces, site)?;
    if averaged != own {
        return Err(Error::BadParams {
            what: "weighted replacements do not average to the agent's choice at the site"
                .into(),
        });
    }
    let mut patches = Vec::with_capacity(replacements.len());
    for m in replacements {
        patches.push(patch_agent(spaces, agent, site.clone(), m.clone())?);
    }
    let mixture = mix_agents(weights.clone(), patches)?;
    let original = upsilon(spaces, measure, agent, t)?.value;
    let decomposed = upsilon(spaces, measure, &mixture, t)?.value;
    let outcome = if original == decomposed {
        None
    } else {
        cex(
            format!("score after decomposing at \"{}\"", spaces.history_text(site)),
            decomposed,
            original,
        )
    };
    Ok(CheckReport::from_outcome("patch_decomposition", t, outcome))
}

/// Verifies that partial values never drift by more than the declared tail
/// bounds allow: for every battery agent and `t1 < t2 <= t`, the value change
/// between the two step counts stays within `bound(t1) + bound(t2)`.
pub fn check_tail_soundness<S: Scalar>(
    spaces: &Spaces<S>,
    env: &Env<S>,
    battery: &[Agent<S>],
    t: usize,
) -> Result<CheckReport<S>> {
    let bound = env.tail_bound(spaces).ok_or(Error::NoTailBound)?;
    let allowed: Vec<S> = (0..=t).map(|k| bound.at(k)).collect();
    let mut outcome = None;
    'battery: for (i, agent) in battery.iter().enumerate() {
        let profile = value_vector(spaces, agent, env, t)?;
        for hi in 1..=t {
            for lo in 0..hi {
                let drift = (profile[hi].clone() - profile[lo].clone()).abs();
                let limit = allowed[lo].clone() + allowed[hi].clone();
                if drift > limit {
                    outcome = cex(
                        format!("battery agent {i} between steps {lo} and {hi}"),
                        drift,
                        limit,
                    );
                    break 'battery;
                }
            }
        }
    }
    Ok(CheckReport::from_outcome("tail_soundness", t, outcome))
}

/// Weak and strong symmetry verdicts for a measure, evaluated exactly on a
/// battery (weak symmetry on the self-dual members of the battery and of its
/// symmetrized copy, strong symmetry on every member), plus whether the two
/// verdicts diverge.
#[derive(Clone, Debug)]
pub struct SymmetryOutcome<S: Scalar> {
    pub weak: CheckReport<S>,
    pub strong: CheckReport<S>,
    pub diverged: bool,
}

pub fn check_symmetry<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    battery: &[Agent<S>],
    t: usize,
) -> Result<SymmetryOutcome<S>> {
    require_finite_horizon(spaces, measure, t)?;
    if battery.is_empty() {
        return Err(Error::BadParams {
            what: "symmetry battery is empty".into(),
        });
    }
    let mut weak_subjects: Vec<(String, Agent<S>)> = Vec::new();
    for (i, agent) in battery.iter().enumerate() {
        if self_dual_up_to(spaces, agent, t)? {
            weak_subjects.push((format!("battery agent {i}"), agent.clone()));
        }
        let sym = symmetrize(spaces, agent)?;
        weak_subjects.push((format!("symmetrized battery agent {i}"), sym));
    }
    let mut weak_cex = None;
    for (name, agent) in &weak_subjects {
        let score = upsilon(spaces, measure, agent, t)?.value;
        if !score.is_zero() {
            weak_cex = cex(format!("score of self-dual {name}"), score, S::zero());
            break;
        }
    }
    let weak = CheckReport::from_outcome("symmetry_weak", t, weak_cex)
        .with_note(format!("self-dual subjects tested: {}", weak_subjects.len()));
    let mut strong_cex = None;
    for (i, agent) in battery.iter().enumerate() {
        let dual = dual_agent(spaces, agent)?;
        let score = upsilon(spaces, measure, agent, t)?.value;
        let dual_score = upsilon(spaces, measure, &dual, t)?.value;
        if dual_score != -score.clone() {
            strong_cex = cex(
                format!("score of the dual of battery agent {i}"),
                dual_score,
                -score,
            );
            break;
        }
    }
    let strong = CheckReport::from_outcome("symmetry_strong", t, strong_cex);
    let diverged = weak.passed() != strong.passed();
    Ok(SymmetryOutcome {
        weak,
        strong,
        diverged,
    })
}

/// Exact value ranges of two agent samples in one environment, and whether
/// they are interval-disjoint. Refutation-only: a disjoint pair is merely
/// consistent with separability, an interleaved pair refutes it for this
/// environment and sample.
#[derive(Clone, Debug)]
pub struct SeparabilityOutcome<S: Scalar> {
    pub report: CheckReport<S>,
    pub inside: ValueRange<S>,
    pub outside: ValueRange<S>,
}

pub fn separability_probe<S: Scalar>(
    spaces: &Spaces<S>,
    env: &Env<S>,
    inside: &[Agent<S>],
    outside: &[Agent<S>],
    t: usize,
) -> Result<SeparabilityOutcome<S>> {
    let bound = env.tail_bound(spaces).ok_or(Error::NoTailBound)?;
    if !bound.at(t).is_zero() {
        return Err(Error::NoFiniteHorizon {
            what: format!("environment tail does not vanish at depth {t}"),
        });
    }
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::BadParams {
            what: "both agent samples must be nonempty".into(),
        });
    }
    let mut inside_values = Vec::with_capacity(inside.len());
    for agent in inside {
        inside_values.push(crate::valuation::value_at(spaces, agent, env, t)?.value);
    }
    let mut outside_values = Vec::with_capacity(outside.len());
    for agent in outside {
        outside_values.push(crate::valuation::value_at(spaces, agent, env, t)?.value);
    }
    let inside_range = ValueRange::spanning(&inside_values);
    let outside_range = ValueRange::spanning(&outside_values);
    let outcome = if inside_range.disjoint_from(&outside_range) {
        None
    } else {
        cex(
            "overlapping value ranges (separability refuted for this sample)".into(),
            inside_range.hi.clone(),
            outside_range.lo.clone(),
        )
    };
    let note = if outcome.is_none() {
        "disjoint ranges: consistent with separability (not a proof)".to_string()
    } else {
        "interleaved ranges: separability refuted for this environment and sample"
            .to_string()
    };
    let report = CheckReport::from_outcome("separability", t, outcome).with_note(note);
    Ok(SeparabilityOutcome {
        report,
        inside: inside_range,
        outside: outside_range,
    })
}

/// Samples random weighted mixtures over sub-multisets of `members` and
/// tests whether each mixture's value in `env` after `t` steps stays at or
/// above `threshold`. Any mixture below the threshold is a closure violation
/// and is reported with its weights; members already below the threshold are
/// recorded in the notes.
#[allow(clippy::too_many_arguments)]
pub fn closure_probe<S: Scalar>(
    spaces: &Spaces<S>,
    members: &[Agent<S>],
    env: &Env<S>,
    threshold: &S,
    t: usize,
    trials: usize,
    seed: u64,
) -> Result<CheckReport<S>> {
    if members.is_empty() {
        return Err(Error::BadParams {
            what: "closure probe needs at least one member".into(),
        });
    }
    let mut notes = Vec::new();
    for (i, member) in members.iter().enumerate() {
        let v = crate::valuation::value_at(spaces, member, env, t)?.value;
        let side = if v >= *threshold { "inside" } else { "outside" };
        notes.push(format!("member {i}: value {v} ({side})"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcome = None;
    for trial in 0..trials {
        let k = rng.gen_range(2..=3usize);
        let picks: Vec<usize> = (0..k).map(|_| rng.gen_range(0..members.len())).collect();
        let weights = sample_positive_weights::<S>(&mut rng, k, 12);
        let components: Vec<Agent<S>> =
            picks.iter().map(|&i| members[i].clone()).collect();
        let mixture = mix_agents(weights.clone(), components)?;
        let v = crate::valuation::value_at(spaces, &mixture, env, t)?.value;
        if v < *threshold {
            let ws = weights
                .weights()
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let ms = picks
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",");
            outcome = cex(
                format!("trial {trial}: mixture of members ({ms}) with weights ({ws})"),
                v,
                threshold.clone(),
            );
            break;
        }
    }
    let mut report = CheckReport::from_outcome("closure", t, outcome);
    report.notes = notes;
    Ok(report)
}

/// The perturbation experiment at one history: split the agent's choice at
/// the site into two patched neighbors a distance `eps_prime` away whose
/// equal-weight mixture averages back to the original choice, verify the
/// score decomposes exactly, and exhibit which neighbor does not score below
/// (and which not above) the original. Succeeding certifies the agent is
/// neither a strict local maximum nor a strict local minimum of the score at
/// radius `eps_prime`.
#[derive(Clone, Debug)]
pub struct ExtremaOutcome<S: Scalar> {
    pub report: CheckReport<S>,
    pub eps_prime: S,
    pub raised: Dist<S>,
    pub lowered: Dist<S>,
    pub score: S,
    pub raised_score: S,
    pub lowered_score: S,
}

pub fn extrema_probe<S: Scalar>(
    spaces: &Spaces<S>,
    measure: &WeightedMeasure<S>,
    agent: &Agent<S>,
    site: &History,
    eps: &S,
    t: usize,
) -> Result<ExtremaOutcome<S>> {
    require_finite_horizon(spaces, measure, t)?;
    if *eps <= S::zero() {
        return Err(Error::BadParams {
            what: "perturbation radius must be positive".into(),
        });
    }
    if site.percept_count() > t {
        return Err(Error::BadParams {
            what: "site lies deeper than the probe depth".into(),
        });
    }
    if agent.prob(spaces, site)?.is_zero() {
        return Err(Error::SiteUnreachable);
    }
    let choice = agent.act(spaces, site)?;
    let interior: Vec<usize> = (0..choice.len())
        .filter(|&y| {
            let m = choice.mass(y);
            !m.is_zero() && *m != S::one()
        })
        .collect();
    if interior.len() < 2 {
        return Err(Error::SiteDeterministic);
    }
    let (y0, y1) = (interior[0], interior[1]);
    let p0 = choice.mass(y0).clone();
    let p1 = choice.mass(y1).clone();
    let mut eps_prime = eps.clone();
    for candidate in [
        p0.clone(),
        S::one() - p0.clone(),
        p1.clone(),
        S::one() - p1.clone(),
    ] {
        if candidate < eps_prime {
            eps_prime = candidate;
        }
    }
    let mut m1 = choice.masses().to_vec();
    m1[y0] = m1[y0].clone() - eps_prime.clone();
    m1[y1] = m1[y1].clone() + eps_prime.clone();
    let m1 = Dist::new(m1)?;
    let mut m2 = choice.masses().to_vec();
    m2[y0] = m2[y0].clone() + eps_prime.clone();
    m2[y1] = m2[y1].clone() - eps_prime.clone();
    let m2 = Dist::new(m2)?;
    let patch1 = patch_agent(spaces, agent, site.clone(), m1.clone())?;
    let patch2 = patch_agent(spaces, agent, site.clone(), m2.clone())?;
    let score = upsilon(spaces, measure, agent, t)?.value;
    let score1 = upsilon(spaces, measure, &patch1, t)?.value;
    let score2 = upsilon(spaces, measure, &patch2, t)?.value;
    let half = from_ratio::<S>(1, 2);
    let mut outcome = None;
    let blended = half.clone() * score1.clone() + half * score2.clone();
    if blended != score {
        outcome = cex(
            format!(
                "equal-weight decomposition at \"{}\"",
                spaces.history_text(site)
            ),
            blended,
            score.clone(),
        );
    }
    if outcome.is_none() {
        for (which, patch) in [(1usize, &patch1), (2usize, &patch2)] {
            let d = distance_up_to(spaces, agent, patch, t)?;
            if d != eps_prime {
                outcome = cex(
                    format!("distance to patched neighbor {which}"),
                    d,
                    eps_prime.clone(),
                );
                break;
            }
        }
    }
    let (raised, raised_score, lowered, lowered_score) = if score1 >= score2 {
        (m1.clone(), score1.clone(), m2.clone(), score2.clone())
    } else {
        (m2.clone(), score2.clone(), m1.clone(), score1.clone())
    };
    let report = CheckReport::from_outcome("extrema", t, outcome).with_note(format!(
        "neighbor scores {raised_score} and {lowered_score} straddle {score} at radius \
         {eps_prime}"
    ));
    Ok(ExtremaOutcome {
        report,
        eps_prime,
        raised,
        lowered,
        score,
        raised_score,
        lowered_score,
    })
}

fn sample_positive_weights<S: Scalar>(
    rng: &mut ChaCha8Rng,
    n: usize,
    denominator: i64,
) -> WeightVector<S> {
    let mut counts = vec![1i64; n];
    let mut remaining = denominator - n as i64;
    while remaining > 0 {
        let slot = rng.gen_range(0..n);
        let take = rng.gen_range(1..=remaining);
        counts[slot] += take;
        remaining -= take;
    }
    let weights = counts
        .into_iter()
        .map(|k| from_ratio::<S>(k, denominator))
        .collect();
    WeightVector::new(weights).expect("counts sum to the denominator")
}

/// Seeded generator of random desks: small symbol spaces, table agents with
/// denominator-bounded rational masses, table environments, and weight
/// vectors. Identical seeds reproduce identical desks.
pub struct Sampler {
    rng: ChaCha8Rng,
    pub mass_denominator: i64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mass_denominator: 12,
        }
    }

    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    /// Two actions, one or two observations, rewards {-1, 0, 1}.
    pub fn spaces<S: Scalar>(&mut self, observations: usize) -> Spaces<S> {
        let obs = (0..observations.clamp(1, 2))
            .map(|i| format!("x{i}"))
            .collect();
        Spaces::new(
            vec!["a".into(), "b".into()],
            obs,
            vec![-S::one(), S::zero(), S::one()],
        )
        .expect("canonical desk spaces are valid")
    }

    /// A distribution with every mass a multiple of `1 / mass_denominator`.
    pub fn dist<S: Scalar>(&mut self, n: usize) -> Dist<S> {
        let d = self.mass_denominator;
        let mut counts = vec![0i64; n];
        let mut remaining = d;
        for slot in counts.iter_mut().take(n - 1) {
            let take = self.rng.gen_range(0..=remaining);
            *slot = take;
            remaining -= take;
        }
        counts[n - 1] = remaining;
        counts.shuffle(&mut self.rng);
        let mass = counts.into_iter().map(|k| from_ratio::<S>(k, d)).collect();
        Dist::new(mass).expect("counts sum to the denominator")
    }

    /// Strictly positive weights summing to 1.
    pub fn weights<S: Scalar>(&mut self, n: usize) -> WeightVector<S> {
        sample_positive_weights(&mut self.rng, n, self.mass_denominator)
    }

    /// A table agent with random entries at every acting history with at
    /// most `depth` percepts and a random default elsewhere.
    pub fn table_agent<S: Scalar>(&mut self, spaces: &Spaces<S>, depth: usize) -> Agent<S> {
        let n = spaces.num_actions();
        let entries = crate::reference::act_sites(spaces, depth)
            .into_iter()
            .map(|h| (h, self.dist::<S>(n)))
            .collect();
        Agent::table(spaces, entries, Some(self.dist::<S>(n)))
            .expect("sampled entries are valid")
    }

    /// A table environment with the given horizon: random entries for the
    /// first two steps and a random default for deeper histories.
    pub fn table_env<S: Scalar>(&mut self, spaces: &Spaces<S>, horizon: usize) -> Env<S> {
        let n = spaces.num_percepts();
        let mut entries = vec![(History::empty(), self.dist::<S>(n))];
        for h in crate::reference::histories_with_len(spaces, 2) {
            entries.push((h, self.dist::<S>(n)));
        }
        Env::table(spaces, entries, Some(self.dist::<S>(n)), Some(horizon))
            .expect("sampled entries are valid")
    }

    /// A horizon-1 environment: one random percept distribution, then quiet.
    /// Such environments keep every agent's values in [-1, 1].
    pub fn opening_env<S: Scalar>(&mut self, spaces: &Spaces<S>) -> Env<S> {
        let n = spaces.num_percepts();
        let opening = self.dist::<S>(n);
        Env::table(spaces, vec![(History::empty(), opening)], None, Some(1))
            .expect("opening entry is valid")
    }

    /// A random acting history with `percepts` percepts, drawn uniformly
    /// over items.
    pub fn act_site<S: Scalar>(&mut self, spaces: &Spaces<S>, percepts: usize) -> History {
        let mut h = History::empty();
        for step in 0..percepts {
            let x = spaces
                .percepts()
                .nth(self.pick(spaces.num_percepts()))
                .expect("index in range");
            h.push(Item::Percept(x));
            if step + 1 < percepts {
                let y = spaces
                    .action_ids()
                    .nth(self.pick(spaces.num_actions()))
                    .expect("index in range");
                h.push(Item::Action(y));
            }
        }
        h
    }
}
