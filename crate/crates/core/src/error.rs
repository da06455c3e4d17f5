use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular point: potential evaluated at log center x = {0}")]
    SingularPoint(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("pole proximity: |sin theta| = {value:.3e} near x = {x}")]
    PoleProximity { x: f64, value: f64 },
    #[error("no admissible theta0 found up to tau = {0}")]
    NoAdmissibleSeed(f64),
    #[error("tolerance not reached: estimate {achieved:.3e}, requested {requested:.3e}")]
    ToleranceNotReached { achieved: f64, requested: f64 },
    #[error("cannot satisfy assumption (A): characteristic function vanishes at 0 after all shifts")]
    AssumptionA,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("did not converge within radius 1 of guess {0}")]
    NoConvergence(C64),
    #[error("zero on contour")]
    ZeroOnContour,
    #[error("strip count mismatch unresolved: {0}")]
    StripMismatch(String),
    #[error("missing eigenvalue index {0}")]
    MissingIndex(i64),
    #[error("order less than {m}: |y_{last}(1)| = {defect:.3e}")]
    OrderLessThan { m: usize, last: usize, defect: f64 },
    #[error("unsupported singular term: {0}")]
    UnsupportedTerm(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    /// Input errors (as opposed to numerical failures).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidPotential(_) | Error::Domain(_) | Error::UnsupportedTerm(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
