use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ellipsoid: {0}")]
    InvalidEllipsoid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("gradient undefined: component {index} is zero")]
    GradientUndefined { index: usize },

    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),

    #[error("point {0} outside the open unit disc")]
    OutsideDisc(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid size {got} invalid: {reason}")]
    GridSize { got: usize, reason: String },

    #[error("all boundary samples are non-finite")]
    AllSamplesNonFinite,

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("even coefficient count {0}; self-inversive polynomials have degree 2m")]
    EvenCoefficientCount(usize),

    #[error("polynomial is not self-inversive (residual {0:.3e})")]
    NotSelfInversive(f64),

    #[error("circle values negative: min {0:.3e}")]
    NegativeOnCircle(f64),

    #[error("odd multiplicity ({count}) of unit-circle roots near {root}")]
    OddUnimodularMultiplicity { count: usize, root: String },

    #[error("scale factor not real (imaginary part {0:.3e})")]
    ScaleNotReal(f64),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("out-of-band Fourier energy {0:.3e}")]
    OutOfBand(f64),

    #[error("boundary values leave ∂E: max |u(φ*)| = {0:.3e}")]
    OffBoundary(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("quadrature size {got} too small for bandwidth {bandwidth}")]
    QuadratureTooSmall { got: usize, bandwidth: usize },

    #[error("no convergent start: {0}")]
    NoConvergence(String),

    #[error("no feasible disc at degree {0}")]
    Infeasible(usize),

    #[error("{0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
