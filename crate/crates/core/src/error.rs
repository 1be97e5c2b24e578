use thiserror::Error;

use crate::state::PeakonState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty configuration: at least one peakon is required")]
    Empty,

    #[error("position and momentum arrays differ in length ({q} vs {p})")]
    LengthMismatch { q: usize, p: usize },

    #[error("non-finite {what}[{index}]")]
    NonFinite { what: &'static str, index: usize },

    #[error("singular configuration: positions {i} and {j} coincide")]
    Singular { i: usize, j: usize },

    #[error("positions are not strictly descending at index {index}")]
    Ordering { index: usize },

    #[error("kernel matrix is near-singular (condition number {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("enumeration budget exceeded: {terms} terms > budget {budget}")]
    Budget { terms: u128, budget: u128 },

    #[error("pair index {k} out of range for n = {n}")]
    PairIndex { k: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("gap {gap:e} exceeds merge threshold {threshold:e}")]
    GapTooLarge { gap: f64, threshold: f64 },

    #[error("state too close to a sign discontinuity (min gap {gap:e} < {guard:e})")]
    SignGuard { gap: f64, guard: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64, state: Box<PeakonState> },

    #[error("non-finite values encountered during integration at t = {t}")]
    NonFiniteState { t: f64, state: Box<PeakonState> },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
