//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("negative rate {rate} on edge ({from}, {to})")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("duplicate rate entry for edge ({from}, {to})")]
    DuplicateEntry { from: usize, to: usize },
    #[error("a chain needs at least two states (got {0})")]
    EmptyStateSet(usize),
    #[error("rate entry references state {index} but the chain has {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("chain is reducible: {0}")]
    Reducible(String),
    #[error("measures live on different supports ({0} vs {1} states)")]
    SupportMismatch(usize, usize),
    #[error("uniformization series too long (lambda*t = {0:.3e}); sub-step the interval")]
    NonconvergentSeries(f64),
    #[error("target set covers the whole state space")]
    TargetIsWholeSpace,
    #[error("subset is empty")]
    EmptySubset,
    #[error("reflected chain on the given set is reducible; repartition the wells")]
    ReducibleReflection,
    #[error("enlargement rate gamma must be positive (got {0})")]
    NonpositiveGamma(f64),
    #[error("sets A and B must be disjoint and nonempty")]
    Overlap,
    #[error("operation requires a reversible chain (detailed balance violated at edge ({0}, {1}))")]
    NotReversible(usize, usize),
    #[error("test function violates the boundary condition at state {state}: expected {expected}, got {got}")]
    BoundaryViolation { state: usize, expected: f64, got: f64 },
    #[error("not a unit flow from A to B: {0}")]
    NotAFlow(String),
    #[error("starting state lies inside the target set")]
    EtaInA,
    #[error("partition has no bottom sets B^x")]
    NoBottoms,
    #[error("Psi projection is undefined on the separating set")]
    PsiOnDelta,
    #[error("joint state-space product too large ({0} entries); use the Monte Carlo route")]
    ProductTooLarge(usize),
    #[error("model parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("state space too large: {0} states exceeds the {1} guard")]
    StateSpaceTooLarge(usize, usize),
    #[error("no saddle/minima structure found: {0}")]
    SaddleNotFound(String),
    #[error("potential has a local minimum on the domain boundary near lattice point {0}")]
    NonSmoothBoundary(String),
    #[error("no well exits observed within the horizon")]
    NoExitsObserved,
    #[error("requested times extend beyond the simulation horizon")]
    TimesBeyondHorizon,
    #[error("model spec parse error: {0}")]
    SpecParseError(String),
    #[error("state space too large for a direct stationary solve and no reversible structure detected ({0} states)")]
    StationarySolveTooLarge(usize),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
