use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value outside the admissible domain: {0}")]
    Domain(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("problem too large for exhaustive search: {0}")]
    Capacity(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("constraint set is empty: least-squares residual {residual:.6e} exceeds radius {eta:.6e}")]
    Infeasible { residual: f64, eta: f64 },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
