//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by spectral-transport operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frequency grids do not match: {0}")]
    GridMismatch(String),

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("matrix is indefinite: eigenvalue {eigenvalue:.6e} below -{tolerance:.3e}")]
    Indefinite { eigenvalue: f64, tolerance: f64 },

    #[error(
        "spectrum not coercive at grid index {index} (theta={theta:.6}): \
         min eigenvalue {min_eig:.3e} < {required:.3e}"
    )]
    NotCoercive {
        index: usize,
        theta: f64,
        min_eig: f64,
        required: f64,
    },

    #[error("transfer evaluation ill-conditioned at grid index {index}: condition estimate {cond:.3e}")]
    IllConditioned { index: usize, cond: f64 },

    #[error("unstable filter: spectral radius {rho:.6} >= 1")]
    UnstableFilter { rho: f64 },

    #[error("invalid state-space realization: {0}")]
    InvalidFilter(String),

    #[error("invalid filter bank: {0}")]
    InvalidBank(String),

    #[error(
        "numerical rank ambiguity computing the moment-map range: \
         singular-value gap {gap:.3e} < 1e3; increase the grid size"
    )]
    RankAmbiguity { gap: f64 },

    #[error("not a spectral factor: residual {residual:.3e} at grid index {index}")]
    NotAFactor { index: usize, residual: f64 },

    #[error("sensor characteristic near singular at grid index {index}: min singular value {sigma_min:.3e}")]
    SingularCharacteristic { index: usize, sigma_min: f64 },

    #[error("integration result has non-negligible imaginary part {residual:.3e}; input is not a real-process spectrum")]
    ImaginaryResidual { residual: f64 },

    #[error("multiplier outside the positive cone: min eigenvalue {min_eig:.3e} over the grid")]
    BoundaryViolation { min_eig: f64 },

    #[error("covariance target rejected: {0}")]
    InfeasibleTarget(String),

    #[error("data record too short: {0}")]
    DataTooShort(String),

    #[error("random generation budget exhausted after {attempts} attempts: {reason}")]
    GenerationBudget { attempts: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
