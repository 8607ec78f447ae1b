use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A time step or grid violates an explicit-scheme stability bound.
    #[error("rejected configuration: {bound} = {value:.6e} exceeds limit {limit}")]
    Unstable {
        bound: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("solution diverged at step {step}: non-finite {quantity}")]
    Diverged { step: usize, quantity: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("cannot normalize an all-zero amplitude vector")]
    ZeroNorm,

    #[error("qubit {index} out of range for a {total}-qubit register")]
    QubitOutOfRange { index: usize, total: usize },

    #[error("block-encoding precondition violated: |d| = {value} >= 1 at entry {index}")]
    LcuDomain { index: usize, value: f64 },

    #[error("non-finite gradient for parameter {path}")]
    NonFiniteGradient { path: String },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("relative L2 is undefined: reference norm is zero")]
    ZeroReference,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
