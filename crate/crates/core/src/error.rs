use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel gradient is unbounded at x = {0}")]
    SingularPoint(f64),
    #[error("gradient norm diverges for q = {q} (critical exponent {qbar})")]
    DivergentNorm { q: f64, qbar: f64 },
    #[error("domain half-width {l} does not contain support radius {radius}")]
    DomainTooSmall { l: f64, radius: f64 },
    #[error("bad resolution: {0}")]
    BadResolution(String),
    #[error("family is not regular; witness cycle {0:?}")]
    NotRegular(Vec<usize>),
    #[error("N = {0} is too large for exhaustive cycle enumeration (max 10)")]
    TooLarge(usize),
    #[error("lambda equals one; no isolated fixed point")]
    LambdaOne,
    #[error("degenerate interaction cycle: {0}")]
    DegenerateCycle(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("fixed point iteration failed: {0}")]
    NotFound(String),
    #[error("step too large at t = {t}: component {index} changed by more than 50%")]
    StepTooLarge { t: f64, index: usize },
    #[error("CFL violated: dt = {dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite value in species {0}")]
    NonFinite(usize),
    #[error("species {0} has zero mass")]
    ZeroMass(usize),
    #[error("slope fit needs at least 3 points, got {0}")]
    Underdetermined(usize),
    #[error("unsupported coupling pattern: {0}")]
    UnsupportedPattern(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
