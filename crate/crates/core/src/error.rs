use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at {0}")]
    GammaPole(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series did not converge: {0}")]
    NonConvergence(String),
    #[error("no contour abscissa separates the pole families: {0}")]
    PoleSeparation(String),
    #[error("Mellin-Barnes kernel does not decay within the contour: {0}")]
    DivergentKernel(String),
    #[error("coefficient instability: residual {0:e}")]
    CoefficientInstability(f64),
    #[error("truncation cap {cap} exceeded (residual {residual:e})")]
    TruncationCap { cap: usize, residual: f64 },
    #[error("value {value} outside [0, 1] beyond tolerance")]
    OutOfRange { value: f64 },
    #[error("integer parameter degenerate case: {0}")]
    Degenerate(String),
    #[error("no feasible point found: {0}")]
    Infeasible(String),
    #[error("scenario error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the error originates from input validation rather than numerics.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::InvalidParameter(_))
    }
}
