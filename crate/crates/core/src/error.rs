use thiserror::Error;

/// Errors raised while building or transferring finite-dimensional structures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix has a negative eigenvalue {0:.3e}")]
    NotPositive(f64),

    #[error("element lies outside the algebra (residual {0:.3e})")]
    NotInAlgebra(f64),

    #[error("{what}: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("ill-conditioned {what} (condition number {cond:.3e})")]
    IllConditioned { what: String, cond: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("not a projection (residual {0:.3e})")]
    NotProjection(f64),

    #[error("projection is not full: ideal has dimension {got}, expected {expected}")]
    NotFull { got: usize, expected: usize },

    #[error("algebra closure exceeded the dimension bound {0}")]
    ClosureOverflow(usize),

    #[error("inclusions do not match: {0}")]
    InclusionMismatch(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no positive constant found: {0}")]
    NoPositiveConstant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_residual(what: &str, residual: f64, tolerance: f64) -> Result<()> {
    if residual <= tolerance && residual.is_finite() {
        Ok(())
    } else {
        Err(Error::Residual {
            what: what.to_string(),
            residual,
            tolerance,
        })
    }
}
