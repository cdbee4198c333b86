use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("local coordinates undefined at depth {mu} (validity radius {limit})")]
    TooDeep { mu: f64, limit: f64 },

    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("incompatible data: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    Incompatible { defect: f64, tol: f64 },

    #[error("normalization check failed: P[f](0) = {value:.3e} (tolerance {tol:.3e})")]
    Normalization { value: f64, tol: f64 },

    #[error("Neumann data carries net flux {flux:.3e}")]
    IllPosedNeumann { flux: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::Normalization { .. } => 2,
            Error::InvalidDomain(_)
            | Error::InvalidConfig(_)
            | Error::Incompatible { .. }
            | Error::IllPosedNeumann { .. }
            | Error::Json(_) => 3,
            _ => 1,
        }
    }
}
