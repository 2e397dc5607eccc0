use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricerError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("index ({i}, {j}) out of range 1..={max}")]
    IndexOutOfRange { i: usize, j: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate triangle (zero area) while computing a gradient")]
    DegenerateTriangle,
    #[error("singular local flux system in interaction volume ({i}, {j}): |det| = {det:e}")]
    SingularLocalSystem { i: usize, j: usize, det: f64 },
    #[error("row ({i}, {j}) is outside the degenerate band")]
    NotInDegenerateBand { i: usize, j: usize },
    #[error("penalty exponent {exponent} < 1 requires a positive smoothing radius")]
    NonLipschitzPenalty { exponent: f64 },
    #[error("linear solver breakdown: {0}")]
    LinearSolver(String),
    #[error("Newton iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<PricerError>,
    },
    #[error("zero-norm reference surface")]
    ZeroReference,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PricerError {
    fn from(e: std::io::Error) -> Self {
        PricerError::Io(e.to_string())
    }
}

pub type Result<T, E = PricerError> = std::result::Result<T, E>;
