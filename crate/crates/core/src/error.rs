use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Hermite order {k} exceeds the configured maximum {max}")]
    OrderOverflow { k: usize, max: usize },

    #[error("quadrature order {order} too low: doubling changed the result by {change:e}")]
    QuadratureTooLow { order: usize, change: f64 },

    #[error("constant fit is underdetermined: {0}")]
    UnderdeterminedFit(String),

    #[error("constant fit unstable: spread {spread:e} across alphas exceeds {limit:e}")]
    FitUnstable { spread: f64, limit: f64 },

    #[error("interval constant undefined on [{a}, {b}]: the relevant endpoint is 0")]
    UndefinedConstant { a: f64, b: f64 },

    #[error("rejection sampler stalled after {proposals} proposals at point {point}")]
    RejectionStall { point: usize, proposals: u64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("extended precision exhausted: results still moved by {change:e} at {bits} bits")]
    PrecisionExhausted { bits: u64, change: f64 },

    #[error("operator invariant violated: {0}")]
    InvariantViolation(String),

    #[error("arcs overlap: {0}")]
    ArcOverlap(String),

    #[error("hypotheses violated: {}", .0.join("; "))]
    HypothesisViolation(Vec<String>),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureTooLow { .. }
                | Error::FitUnstable { .. }
                | Error::RejectionStall { .. }
                | Error::NoConvergence { .. }
                | Error::PrecisionExhausted { .. }
                | Error::InvariantViolation(_)
        )
    }
}
