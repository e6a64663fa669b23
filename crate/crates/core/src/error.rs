use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid reaction channel: {0}")]
    InvalidChannel(String),

    #[error("invalid reaction spec: {0}")]
    InvalidSpec(String),

    #[error("truncation n_max={n_max} is below the largest reactant count {required}")]
    InvalidTruncation { n_max: usize, required: usize },

    #[error(
        "truncation overflow: mass {mass:e} left the state space above n_max={n_max} \
         (tolerance {tolerance:e}); retry with n_max >= {required}"
    )]
    TruncationOverflow {
        n_max: usize,
        mass: f64,
        tolerance: f64,
        required: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("ensemble has every path flagged as blown up ({flagged} paths)")]
    EmptyEnsemble { flagged: usize },

    #[error("insufficient ensemble: {alive} unflagged paths, need at least {required}")]
    InsufficientEnsemble { alive: usize, required: usize },

    #[error("point {point} lies within the ensemble modulus hull (max |z| = {hull}, margin 10%)")]
    Proximity { point: String, hull: f64 },

    #[error("Laurent series diverges: |phi| = {modulus} is not above the convergence radius {radius}")]
    Divergence { modulus: f64, radius: f64 },

    #[error("quadrature range truncation estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Range { estimate: f64, tolerance: f64 },

    #[error("grid too coarse for n_max={n_max}: spacing {spacing} exceeds {limit}")]
    Resolution { n_max: usize, spacing: f64, limit: f64 },

    #[error("misaligned series: {0}")]
    Alignment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
