//! Transport distances between matrix power spectral densities and
//! THREE-like spectral estimation from indirect measurements.
//!
//! The crate provides:
//!
//! - the weighted transportation (weighted Hellinger) distance between
//!   multivariate spectral densities, with its optimal coupling factor and
//!   the static Gaussian special case ([`transport`]);
//! - moment-constrained spectral estimators dual to that distance and to
//!   the Itakura-Saito divergence, for direct or indirect measurements
//!   through a known sensor characteristic ([`transport_estimator`],
//!   [`is_estimator`]);
//! - the filter-bank moment machinery ([`bank`]), a feasibility-preserving
//!   covariance pipeline ([`ingest`]) and a seed-deterministic Monte Carlo
//!   benchmark harness ([`montecarlo`]).

pub mod bank;
pub mod error;
pub mod filter;
pub mod grid;
pub mod ingest;
pub mod is_estimator;
pub mod linalg;
pub mod matrix_grid;
pub mod montecarlo;
pub mod run;
pub mod solver;
pub mod transport;
pub mod transport_estimator;

pub use bank::{make_covariance_lag_bank, BankSpec, CovarianceTarget, FilterBank};
pub use error::{Error, Result};
pub use filter::{FilterSpec, StateSpaceFilter};
pub use grid::FrequencyGrid;
pub use ingest::{feasible_sigma, sample_state_covariance, DataRecord, FeasibleSigmaOptions};
pub use is_estimator::{is_divergence, weighted_is_divergence, IsProblem};
pub use matrix_grid::{integrate_grid, psd_from_factor, GridKind, MatrixGrid};
pub use montecarlo::{run_study, ExperimentConfig, ExperimentReport};
pub use solver::{Multiplier, SolveOptions, SolveOutcome, SolveStatus};
pub use transport::{
    hellinger_distance, optimal_coupling_factor, static_gaussian_w2, transport_distance,
    weighted_factor_gap, DistanceReport,
};
pub use transport_estimator::{
    indirect_spectrum, weight_from_characteristic, EstimationResult, IndirectDirection, Method,
    TransportProblem,
};
