use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator does not commute with J (max residual {residual:e})")]
    NotSCommuting { residual: f64 },

    #[error("matrix is not symmetric (max residual {residual:e})")]
    NotSymmetric { residual: f64 },

    #[error("matrix is not Hermitian (max residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is indefinite (smallest eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("dispersion {found} differs from 2h = {expected}")]
    DispersionMismatch { expected: f64, found: f64 },

    #[error("exact averages are implemented up to three quadratic factors, found {degree}")]
    UnsupportedDegree { degree: usize },

    #[error("{0}")]
    InvalidArgument(String),
}
