use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid state parameters: {0}")]
    InvalidState(String),
    #[error("field is not finite after {0}")]
    NonFinite(&'static str),
    #[error("{masked} of {total} points fall below the density floor; state too singular")]
    TooManyNodes { masked: usize, total: usize },
    #[error("coefficient array length {got} does not match variant {variant} (expected {expected})")]
    CoeffLength {
        variant: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid coefficients: {0}")]
    InvalidCoeffs(String),
    #[error("singular effective mass: 1 + D m / hbar = 0")]
    SingularMass,
    #[error("boost is incommensurate with the periodic box: m v L / hbar = {0} is not a multiple of 2 pi")]
    IncommensurateBoost(f64),
    #[error("density tails too large at the box edge: {0:e} relative to the peak")]
    TailsNotDecayed(f64),
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("evolution aborted at t = {last_good_t}: {reason}")]
    Unstable { last_good_t: f64, reason: String },
    #[error("ODE tolerance not met after {steps} steps (estimated error {err:e})")]
    OdeTolerance { steps: usize, err: f64 },
    #[error("invalid Hill equation: {0}")]
    InvalidHill(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("product grid of {0} points exceeds the memory bound")]
    MemoryBound(usize),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
