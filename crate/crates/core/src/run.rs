//! Config-driven entry points shared by the command line and the C API.
//!
//! Experiments carry too many parameters for flags, so everything above the
//! distance computation is described by JSON configs; flags only override
//! seeds and paths. The same configs drive the C interface.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bank::{BankSpec, CovarianceTarget};
use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::grid::FrequencyGrid;
use crate::ingest::{feasible_sigma, DataRecord, FeasibleSigmaOptions};
use crate::is_estimator::IsProblem;
use crate::linalg::RMat;
use crate::matrix_grid::{psd_from_factor, MatrixGrid};
use crate::montecarlo::SolverConfig;
use crate::transport_estimator::{
    indirect_spectrum, weight_from_characteristic, EstimationResult, IndirectDirection,
    TransportProblem,
};

fn default_grid_points() -> usize {
    FrequencyGrid::DEFAULT_POINTS
}

/// Estimator selector in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Transport,
    Is,
    IsWeighted,
}

/// Where the moment target comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSource {
    /// Measurement record on disk; the feasibility pipeline builds the
    /// target.
    Csv { path: String },
    /// Explicit symmetric matrix (must be admissible for the bank).
    Matrix { values: Vec<Vec<f64>> },
    /// A directly supplied measurement-side spectrum as MatrixGrid JSON;
    /// the target is its exact moment (synthetic studies bypassing data).
    Grid { path: String },
    /// Synthetic shortcut: the exact prior moment `Gamma(Psi)`.
    Prior,
}

/// Source-side prior specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Uninformative white-noise prior.
    Identity,
    /// `Psi = W W*` for a stable shaping filter.
    Filter {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
    /// A spectrum stored as MatrixGrid JSON.
    Grid { path: String },
}

impl PriorSpec {
    fn build(&self, grid: &FrequencyGrid, m: usize) -> Result<MatrixGrid> {
        match self {
            PriorSpec::Identity => Ok(MatrixGrid::identity_weight(grid.clone(), m)),
            PriorSpec::Filter { a, b, c, d } => {
                let spec = FilterSpec {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    d: d.clone(),
                };
                let filter = spec.to_filter()?;
                if filter.n_outputs() != m || filter.n_inputs() != m {
                    return Err(Error::Config(format!(
                        "prior filter must be {m}x{m}, got {}x{}",
                        filter.n_outputs(),
                        filter.n_inputs()
                    )));
                }
                psd_from_factor(&filter.eval_transfer(grid)?)
            }
            PriorSpec::Grid { path } => {
                let g = MatrixGrid::read_json_file(std::path::Path::new(path))?;
                if g.grid() != grid {
                    return Err(Error::Config(format!(
                        "prior grid has {} points, expected {}",
                        g.n_points(),
                        grid.n_points()
                    )));
                }
                if g.dim() != m {
                    return Err(Error::Config(format!(
                        "prior grid dimension {} does not match m={m}",
                        g.dim()
                    )));
                }
                Ok(g)
            }
        }
    }
}

/// A single-estimation problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub method: MethodName,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    pub bank: BankSpec,
    pub sigma: SigmaSource,
    /// Source-side prior `Psi_xi`; the identity when omitted.
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    /// Sensor characteristic `H^{-1}`; direct measurements when omitted.
    #[serde(default)]
    pub h_inv: Option<FilterSpec>,
    /// Constant scalar weight for the weighted IS estimator.
    #[serde(default)]
    pub weight_scalar: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Correlogram lag override for CSV targets.
    #[serde(default)]
    pub l_est: Option<usize>,
}

/// Runs one estimation described by a config.
pub fn run_estimate(config: &EstimateConfig) -> Result<EstimationResult> {
    let grid = FrequencyGrid::new(config.grid_points)?;
    let bank = config.bank.build(grid.clone())?;
    let m = bank.n_inputs();

    let h_inv = match &config.h_inv {
        Some(spec) => {
            let filter = spec.to_filter()?;
            if filter.n_inputs() != m || filter.n_outputs() != m {
                return Err(Error::Config(format!(
                    "h_inv must be {m}x{m}, got {}x{}",
                    filter.n_outputs(),
                    filter.n_inputs()
                )));
            }
            Some(filter)
        }
        None => None,
    };

    let psi_xi = config
        .prior
        .clone()
        .unwrap_or(PriorSpec::Identity)
        .build(&grid, m)?;
    let psi = match &h_inv {
        Some(h) => indirect_spectrum(&psi_xi, h, IndirectDirection::ToMeasurement)?,
        None => psi_xi,
    };

    let sigma = match &config.sigma {
        SigmaSource::Csv { path } => {
            let data = DataRecord::from_csv_path(std::path::Path::new(path))?;
            let opts = FeasibleSigmaOptions {
                l_est: config.l_est,
                ..Default::default()
            };
            feasible_sigma(&data, &bank, &opts)?
        }
        SigmaSource::Matrix { values } => {
            let n = bank.n_states();
            if values.len() != n || values.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!(
                    "sigma matrix must be {n}x{n}"
                )));
            }
            let sigma = RMat::from_fn(n, n, |i, j| values[i][j]);
            CovarianceTarget::new(&bank, sigma)?
        }
        SigmaSource::Grid { path } => {
            let true_phi = MatrixGrid::read_json_file(std::path::Path::new(path))?;
            if true_phi.grid() != &grid {
                return Err(Error::Config(format!(
                    "sigma grid has {} points, expected {}",
                    true_phi.n_points(),
                    grid.n_points()
                )));
            }
            CovarianceTarget::new(&bank, bank.gamma_apply(&true_phi)?)?
        }
        SigmaSource::Prior => CovarianceTarget::new(&bank, bank.gamma_apply(&psi)?)?,
    };

    let opts = config.solver.to_options();
    match config.method {
        MethodName::Transport => {
            let omega = match &h_inv {
                Some(h) => weight_from_characteristic(h, &grid)?,
                None => MatrixGrid::identity_weight(grid.clone(), m),
            };
            TransportProblem::new(&bank, sigma, psi, omega, h_inv.clone())?.estimate(&opts)
        }
        MethodName::Is => {
            IsProblem::new(&bank, sigma, psi, None)?.estimate(&opts, h_inv.as_ref())
        }
        MethodName::IsWeighted => {
            let w = config.weight_scalar.unwrap_or(1.0);
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Config(format!(
                    "weight_scalar must be positive and finite, got {w}"
                )));
            }
            let weight = vec![w; grid.n_points()];
            IsProblem::new(&bank, sigma, psi, Some(weight))?.estimate(&opts, h_inv.as_ref())
        }
    }
}

/// A synthetic data-generation request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Shaping filter of the source process.
    pub w: FilterSpec,
    /// Optional sensor characteristic applied after the shaping filter.
    #[serde(default)]
    pub h_inv: Option<FilterSpec>,
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Simulates a measurement record from filter specs.
pub fn run_simulate(config: &SimulateConfig) -> Result<DataRecord> {
    let w = config.w.to_filter()?;
    let shaping = match &config.h_inv {
        Some(spec) => spec.to_filter()?.series(&w)?,
        None => w,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    crate::montecarlo::simulate_process(&shaping, config.n_samples, &mut rng)
}

/// Wraps a serializable body with a `header` object carrying the generator
/// name, version and a timestamp. The header is the only non-deterministic
/// part of any output file.
pub fn with_header<T: Serialize>(body: &T) -> Result<serde_json::Value> {
    let header = json!({
        "generator": "spectral-transport",
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    });
    let mut value = serde_json::to_value(body)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("header".to_string(), header);
            Ok(value)
        }
        None => Ok(json!({ "header": header, "body": value })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_prior_recovery_via_config() {
        let config: EstimateConfig = serde_json::from_str(
            r#"{
                "method": "transport",
                "grid_points": 128,
                "bank": {"type": "covariance_lags", "m": 1, "l": 2},
                "sigma": {"source": "prior"},
                "prior": {"type": "filter",
                          "a": [[0.5]], "b": [[1.0]], "c": [[0.5]], "d": [[1.0]]}
            }"#,
        )
        .unwrap();
        let result = run_estimate(&config).unwrap();
        assert!(result.converged);
        assert!(result.multiplier.norm() <= 1e-6);
        assert!(result.moment_residual <= 1e-6);
    }

    #[test]
    fn estimate_rejects_unknown_fields() {
        let parsed: std::result::Result<EstimateConfig, _> = serde_json::from_str(
            r#"{"method": "is", "bank": {"type": "covariance_lags", "m": 1, "l": 2},
                "sigma": {"source": "prior"}, "surprise": 1}"#,
        );
        assert!(parsed.is_err());
    }

    #[test]
    fn estimate_with_injected_matrix() {
        let config: EstimateConfig = serde_json::from_str(
            r#"{
                "method": "is",
                "grid_points": 128,
                "bank": {"type": "covariance_lags", "m": 1, "l": 2},
                "sigma": {"source": "matrix", "values": [[1.3333333333333333, 0.6666666666666666],
                                                          [0.6666666666666666, 1.3333333333333333]]}
            }"#,
        )
        .unwrap();
        let result = run_estimate(&config).unwrap();
        assert!(result.converged);
        assert!(result.moment_residual <= 1e-6);
    }

    #[test]
    fn simulate_is_deterministic() {
        let config: SimulateConfig = serde_json::from_str(
            r#"{"w": {"a": [[0.5]], "b": [[1.0]], "c": [[0.5]], "d": [[1.0]]},
                "n_samples": 50, "seed": 9}"#,
        )
        .unwrap();
        let a = run_simulate(&config).unwrap();
        let b = run_simulate(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples(), 50);
    }

    #[test]
    fn header_wraps_objects_in_place() {
        #[derive(Serialize)]
        struct Body {
            x: f64,
        }
        let v = with_header(&Body { x: 1.5 }).unwrap();
        assert!(v.get("header").is_some());
        assert_eq!(v.get("x").unwrap().as_f64().unwrap(), 1.5);
    }
}
