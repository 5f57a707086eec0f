use thiserror::Error;

/// Errors surfaced by the numerical layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("gamma function pole at z = {re} + {im}i")]
    GammaPole { re: f64, im: f64 },

    #[error(
        "quadrature did not converge: residual {residual:.3e} above tolerance {tolerance:.3e} after {levels} refinement levels"
    )]
    QuadratureNoConvergence {
        residual: f64,
        tolerance: f64,
        levels: usize,
    },

    #[error(
        "oscillatory quadrature over budget: {required} nodes required (phase {phase:.3e}), budget {budget}"
    )]
    NodeBudgetExceeded {
        required: usize,
        budget: usize,
        phase: f64,
    },

    #[error("damped-integral extrapolation did not settle: spread {spread:.3e} above {tolerance:.3e}")]
    ExtrapolationNoConvergence { spread: f64, tolerance: f64 },

    #[error("truncation tail estimate {estimate:.3e} above tolerance {tolerance:.3e}")]
    TruncationTail { estimate: f64, tolerance: f64 },

    #[error("set cannot be split: {0}")]
    SplitFailed(String),

    #[error("calibration ill-conditioned: {0}")]
    CalibrationFailed(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
