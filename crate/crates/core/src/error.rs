use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QgsError {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The two-point configuration sits at (or numerically at) g = 1.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// A matrix that must be positive definite is not.
    #[error("singular covariance: {0}")]
    Singular(String),

    /// A series or special function could not be evaluated to the
    /// required precision.
    #[error("precision cannot be certified: {0}")]
    Certification(String),

    /// Cancellation destroyed too many digits of an alternating sum.
    #[error("precision loss: only {digits:.1} significant digits survive ({context})")]
    PrecisionLoss { digits: f64, context: String },

    /// An adaptive scheme ran out of budget before meeting its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A truncated distribution could not be certified to the requested
    /// tail tolerance.
    #[error("truncation: tail mass {tail_mass:.3e} exceeds tolerance {tolerance:.3e} at n_max = {n_max}")]
    Truncation {
        tail_mass: f64,
        tolerance: f64,
        n_max: usize,
    },

    /// A marginal probability is too small for a correlation to be defined.
    #[error("marginal underflow: {0}")]
    Underflow(String),

    /// An exact integer computation left its supported range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Two objects that must describe the same configuration do not.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
}

pub type Result<T> = std::result::Result<T, QgsError>;
