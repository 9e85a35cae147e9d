use thiserror::Error;

/// Unified error type for construction, validation, and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("masses sum to {sum}, expected exactly 1")]
    NotNormalized { sum: String },
    #[error("negative mass {mass} at index {index}")]
    NegativeMass { index: usize, mass: String },
    #[error("carriers differ in size: {left} vs {right}")]
    CarrierMismatch { left: usize, right: usize },
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid weights: {reason}")]
    InvalidWeights { reason: String },
    #[error("history alternation violated: {context}")]
    AlternationViolation { context: String },
    #[error("symbol out of space: {what}")]
    SymbolOutOfSpace { what: String },
    #[error("reward set is not closed under negation")]
    RewardsNotNegationClosed,
    #[error("reward set does not contain zero")]
    ZeroRewardRequired,
    #[error("history has wrong parity: expected one {expected}")]
    WrongParity { expected: &'static str },
    #[error("unknown builtin family: {family}")]
    UnknownFamily { family: String },
    #[error("bad parameters: {what}")]
    BadParams { what: String },
    #[error("node budget of {budget} exhausted during evaluation")]
    DepthOverflow { budget: u64 },
    #[error("environment provides no tail bound")]
    NoTailBound,
    #[error("no finite horizon: {what}")]
    NoFiniteHorizon { what: String },
    #[error("measure is not strongly well-behaved")]
    NotStronglyWellBehaved,
    #[error("measure weights sum to {sum}, expected exactly 1")]
    MeasureNotNormalized { sum: String },
    #[error("patch site is unreachable: the agent gives it weight 0")]
    SiteUnreachable,
    #[error("agent is deterministic at the patch site")]
    SiteDeterministic,
    #[error("parse error: {what}")]
    Parse { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
