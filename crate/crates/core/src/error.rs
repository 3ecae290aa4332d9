use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid covariance: smallest symplectic eigenvalue {nu_min} < 1/2")]
    InvalidCovariance { nu_min: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("symplectic defect {defect:e} exceeds tolerance {tolerance:e} after {refinements} step refinements")]
    SymplecticDefect { defect: f64, tolerance: f64, refinements: u32 },

    #[error("negative radicand {0:e} in symplectic eigenvalue formula")]
    NegativeRadicand(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cavity model error: {0}")]
    Model(String),

    #[error("time {t} outside driver domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("fixed point not converged after {cycles} cycles (residual {residual:e})")]
    NotConverged { cycles: usize, residual: f64 },

    #[error("CSV schema mismatch in {path:?}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("plot rendering failed: {0}")]
    Plot(String),
}
