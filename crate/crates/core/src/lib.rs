//! Exact algebra of history-based agents, environments, and their mixtures.
//!
//! Agents map histories ending in a percept to distributions over actions;
//! environments map histories ending in an action (or the empty history) to
//! distributions over percepts. A percept pairs an observation with a
//! rational reward in [-1, 1]. On top of those two function types the crate
//! provides:
//!
//! * interned symbol spaces, alternating histories, and validated finite
//!   distributions with exact arithmetic throughout;
//! * the multiplicative history-weight recursions for agents, environments,
//!   and their joint interaction, plus exact expected reward at any finite
//!   depth with certified tail bounds;
//! * posterior-weighted mixture agents, dual (reward-reversed) agents,
//!   single-site patches, mixture environments, and weighted expected-reward
//!   measures with a universal-environment construction;
//! * analysis batteries that verify the identities these constructions
//!   satisfy, with exact equality and concrete counterexamples on failure,
//!   plus a catalogue of seeded defects for mutation-testing the batteries.
//!
//! Everything is generic over an exact scalar; [`Rational`] is the
//! arbitrary-precision instantiation used by the command line tool and the
//! default choice for verification work.

#![forbid(unsafe_code)]

pub mod agents;
pub mod analysis;
pub mod defects;
pub mod dist;
pub mod envmix;
pub mod environments;
mod error;
pub mod history;
pub mod mixtures;
pub mod reference;
pub mod scalar;
pub mod spaces;
pub mod valuation;

pub use agents::Agent;
pub use analysis::{
    check_dual_commutation, check_duality, check_factorization, check_measure_linearity,
    check_mixture_laws, check_mixture_laws_with, check_patch_decomposition,
    check_patch_formulas, check_self_mixture, check_symmetry, check_tail_soundness,
    check_value_duality, closure_probe, extrema_probe, separability_probe, CheckReport,
    Counterexample, ExtremaOutcome, Sampler, SeparabilityOutcome, SymmetryOutcome,
    ValueRange, Verdict,
};
pub use defects::{catalogue, Defect, DefectSubject};
pub use dist::Dist;
pub use envmix::{env_dual, mix_envs, universal_env, EnvWeightVector};
pub use environments::{certify_strongly_well_behaved, joint_prob, Env, TailBound};
pub use error::{Error, Result};
pub use history::{History, Item, Parity};
pub use mixtures::{
    distance_up_to, dual_agent, equivalent_up_to, mix_agents, mix_dists, patch_agent,
    self_dual_up_to, symmetrize, PatchSpec, WeightVector,
};
pub use scalar::Scalar;
pub use spaces::{ActionId, ObsId, Percept, RewardId, Spaces};
pub use valuation::{
    upsilon, upsilon_vector, value_at, value_at_with, value_interval, value_profile,
    value_vector, EvalOptions, ValueResult, WeightedMeasure,
};

/// Arbitrary-precision exact rational, the default scalar instantiation.
pub type Rational = num_rational::BigRational;

/// `n/d` as a [`Rational`]. Panics if `d` is zero.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Fixed-precision exact rational for bulk desk-scale batteries. Still
/// exact; numerators and denominators must fit in `i128`, which holds
/// comfortably for small mass denominators at bounded depth. The release
/// and test profiles keep overflow checks on, so exceeding the range panics
/// instead of wrapping.
pub type FastRational = num_rational::Ratio<i128>;

/// `n/d` as a [`FastRational`]. Panics if `d` is zero.
pub fn fast_rat(n: i64, d: i64) -> FastRational {
    FastRational::new(n as i128, d as i128)
}
