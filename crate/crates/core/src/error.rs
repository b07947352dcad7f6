use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("frame out of bounds: mapped points leave the lab domain by {overflow:.4e}")]
    FrameOutOfBounds { overflow: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("profile not found for b = {b}: scanned P(0) over [{lo:.6}, {hi:.6}]")]
    ProfileNotFound { b: f64, lo: f64, hi: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("inconsistency: {0}")]
    Inconsistency(String),
    #[error("stability bound violated: dt*max|u|^2 = {rotation:.4e} > theta_max = {theta_max}")]
    Stability { rotation: f64, theta_max: f64 },
    #[error("non-finite values after t = {last_time}")]
    Divergence { last_time: f64 },
    #[error("decomposition failed after {iterations} iterations; last residuals {residuals:?}")]
    Decomposition { iterations: usize, residuals: [f64; 5] },
    #[error("snapshot {index}: {source}")]
    AtSnapshot { index: usize, source: Box<Error> },
    #[error("grid extent {extent} does not cover the required radius {required}")]
    Extent { extent: f64, required: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not in blow-up regime: {0}")]
    NotInBlowupRegime(String),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input problems (as opposed to numerical breakdowns).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Shape(_)
                | Error::Precondition(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Extent { .. }
        )
    }
}
