use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite integrand value at r = {r:e}")]
    NonFiniteSample { r: f64 },

    #[error("half-line integrand does not decay (f * r^(N-1) grows on the final panels)")]
    TailNotDecaying,

    #[error("function is numerically zero")]
    ZeroFunction,

    #[error("sign component vanishes: {0}")]
    VanishingSignComponent(&'static str),

    #[error("grid mismatch: operands live on different radial grids")]
    GridMismatch,

    #[error("grid radius {radius} too small for cutoff support [0, {support}]")]
    GridTooSmall { radius: f64, support: f64 },

    #[error("failed to bracket a root: {0}")]
    BracketFailure(String),

    #[error("tangential zero at r = {r:e} (|u'| = {slope:e}); perturb the shooting parameter")]
    Tangency { r: f64, slope: f64 },

    #[error("no shooting bracket for k = {k} in [{lo:e}, {hi:e}]; scan table:\n{table}")]
    NoShootingBracket {
        k: usize,
        lo: f64,
        hi: f64,
        table: String,
    },

    #[error("ODE step size underflow at r = {r:e}")]
    StepFailure { r: f64 },

    #[error("solver failure: {0}")]
    SolveFailure(String),

    #[error("cross-check disagreement: {0}")]
    CrossCheck(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("continuation branch lost at p = {p}: {reason}")]
    BranchLost { p: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
