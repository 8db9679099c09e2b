use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix does not commute with S^2 and S_z (off-block residual {residual:.3e})")]
    Structure { residual: f64 },

    #[error("singular amplitude: {0}")]
    Singular(String),

    #[error("optical distance {kd} lies within {tolerance:e} of a multiple of pi; the SWAP coupling diverges there")]
    Divergence { kd: f64, tolerance: f64 },

    #[error("composition resolvent is singular")]
    Composition,

    #[error("degenerate scattering configuration (condition estimate {condition:.3e})")]
    Degenerate { condition: f64 },

    #[error("invalid scattering problem: {0}")]
    InvalidProblem(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NonUnitary { defect: f64 },

    #[error("design error: {0}")]
    Design(String),

    #[error("coupling g0 = {0} is below the threshold g_th = 1")]
    BelowThreshold(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
