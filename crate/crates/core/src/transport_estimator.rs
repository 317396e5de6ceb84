//! Spectrum approximation in the transport distance, solved through its
//! convex dual.
//!
//! Given a feasible moment target `Sigma`, a prior `Psi` and a weight
//! `Omega = H* H` carrying the sensor characteristic, the dual functional
//!
//! ```text
//! J(Lambda) = tr I(Omega Psi Omega (Omega + G* Lambda G)^{-1}) + tr(Sigma Lambda)
//! ```
//!
//! is minimized over multipliers in `Range Gamma` keeping
//! `Omega + G* Lambda G` positive definite on the grid. The primal
//! reconstruction is
//! `Phi = (Omega + G* Lambda G)^{-1} Omega Psi Omega (Omega + G* Lambda G)^{-1}`,
//! and the projected dual gradient `Sigma - Gamma(Phi)` vanishes exactly
//! when the moment constraint holds.

use serde::Serialize;

use crate::bank::{CovarianceTarget, FilterBank};
use crate::error::{Error, Result};
use crate::filter::StateSpaceFilter;
use crate::grid::FrequencyGrid;
use crate::linalg::{complexify, hermitianize, CMat, RMat};
use crate::matrix_grid::{GridKind, MatrixGrid};
use crate::solver::{
    solve_projected_bfgs, DualModel, Multiplier, SolveOptions, SolveOutcome, BARRIER_EPS,
};

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Transport,
    Is,
    IsWeighted,
}

/// Outcome of a full estimation: multiplier, reconstructed spectra and
/// solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub method: Method,
    pub converged: bool,
    pub status: crate::solver::SolveStatus,
    pub iterations: usize,
    pub grad_norm: f64,
    pub dual_value: f64,
    /// `||Gamma(Phi_hat) - Sigma|| / ||Sigma||`.
    pub moment_residual: f64,
    pub multiplier: Multiplier,
    pub phi_hat: MatrixGrid,
    /// Source-side spectrum `H Phi_hat H*` when a sensor characteristic is
    /// attached.
    pub phi_xi_hat: Option<MatrixGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// The transport-distance spectrum approximation problem.
#[derive(Debug, Clone)]
pub struct TransportProblem<'a> {
    bank: &'a FilterBank,
    sigma: CovarianceTarget,
    psi: MatrixGrid,
    omega: MatrixGrid,
    h_inv: Option<StateSpaceFilter>,
    /// Cached `Omega Psi Omega` per frequency.
    weighted_prior: Vec<CMat>,
}

impl<'a> TransportProblem<'a> {
    /// Assembles a problem on the measurement side: `psi` and `omega` live
    /// on the bank grid, `sigma` must be admissible. The optional `h_inv`
    /// is only used to map reconstructions back to the source side.
    pub fn new(
        bank: &'a FilterBank,
        sigma: CovarianceTarget,
        psi: MatrixGrid,
        omega: MatrixGrid,
        h_inv: Option<StateSpaceFilter>,
    ) -> Result<Self> {
        let m = bank.n_inputs();
        if psi.grid() != bank.grid() || omega.grid() != bank.grid() {
            return Err(Error::GridMismatch(
                "prior and weight must live on the bank grid".into(),
            ));
        }
        if psi.shape() != (m, m) || omega.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "prior and weight must be {m}x{m}"
            )));
        }
        if !matches!(psi.kind(), GridKind::Psd | GridKind::Weight)
            || !matches!(omega.kind(), GridKind::Psd | GridKind::Weight)
        {
            return Err(Error::DimensionMismatch(
                "prior and weight must be Hermitian coercive grids".into(),
            ));
        }
        if let Some(h) = &h_inv {
            if h.n_inputs() != m || h.n_outputs() != m {
                return Err(Error::DimensionMismatch(format!(
                    "sensor characteristic must be {m}x{m}"
                )));
            }
        }
        sigma.require_admissible()?;
        let weighted_prior = (0..bank.grid().n_points())
            .map(|k| {
                let w = omega.value(k);
                hermitianize(&(w * psi.value(k) * w))
            })
            .collect();
        Ok(Self {
            bank,
            sigma,
            psi,
            omega,
            h_inv,
            weighted_prior,
        })
    }

    pub fn bank(&self) -> &FilterBank {
        self.bank
    }
    pub fn sigma(&self) -> &CovarianceTarget {
        &self.sigma
    }
    pub fn psi(&self) -> &MatrixGrid {
        &self.psi
    }
    pub fn omega(&self) -> &MatrixGrid {
        &self.omega
    }
    pub fn h_inv(&self) -> Option<&StateSpaceFilter> {
        self.h_inv.as_ref()
    }

    /// Dual objective at a multiplier; [`Error::BoundaryViolation`] outside
    /// the positive cone (the solver treats that as a line-search event).
    pub fn dual_objective(&self, multiplier: &Multiplier) -> Result<f64> {
        self.dual_objective_at(multiplier.lambda())
    }

    /// Dual objective at an arbitrary symmetric matrix (not necessarily in
    /// `Range Gamma`).
    pub fn dual_objective_at(&self, lambda: &RMat) -> Result<f64> {
        self.objective(lambda).ok_or_else(|| Error::BoundaryViolation {
            min_eig: self.barrier_min_eig(lambda),
        })
    }

    /// Projected dual gradient `Sigma - Gamma(Phi(Lambda))`, a symmetric
    /// matrix in `Range Gamma`.
    pub fn dual_gradient(&self, multiplier: &Multiplier) -> Result<RMat> {
        let (_, primal) = self
            .objective_and_primal(multiplier.lambda())
            .ok_or_else(|| Error::BoundaryViolation {
                min_eig: self.barrier_min_eig(multiplier.lambda()),
            })?;
        let g_mat = self.sigma.sigma() - self.bank.gamma_apply_values(&primal);
        let coords = self.bank.range_coordinates(&g_mat);
        Ok(self.bank.assemble_from_coordinates(&coords))
    }

    /// Minimizes the dual functional.
    pub fn solve_dual(&self, opts: &SolveOptions) -> Result<SolveOutcome> {
        solve_projected_bfgs(self, opts)
    }

    /// Pointwise primal reconstruction at a multiplier.
    pub fn reconstruct_phi(&self, multiplier: &Multiplier) -> Result<MatrixGrid> {
        let (_, mut primal) = self
            .objective_and_primal(multiplier.lambda())
            .ok_or_else(|| Error::BoundaryViolation {
                min_eig: self.barrier_min_eig(multiplier.lambda()),
            })?;
        let real = self.psi.real_process() && self.omega.real_process();
        if real {
            crate::matrix_grid::symmetrize_reflection(&mut primal);
        }
        // The reconstruction is psd by construction; near-boundary
        // multipliers may push eigenvalues arbitrarily close to zero, so
        // only material indefiniteness is rejected.
        let scale: f64 = primal.iter().map(|v| v.norm()).fold(0.0, f64::max);
        MatrixGrid::with_coercivity(
            self.bank.grid().clone(),
            primal,
            GridKind::Psd,
            real,
            -1e-12 * (1.0 + scale),
        )
    }

    /// Wraps a coordinate vector as a multiplier, flagging cone membership.
    pub fn multiplier_from_coeffs(&self, coeffs: &[f64]) -> Result<Multiplier> {
        if coeffs.len() != self.bank.range_dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coordinates, got {}",
                self.bank.range_dim(),
                coeffs.len()
            )));
        }
        let v = nalgebra::DVector::from_vec(coeffs.to_vec());
        let lambda = self.bank.assemble_from_coordinates(&v);
        let in_cone = self.barrier_min_eig(&lambda) > BARRIER_EPS;
        Ok(Multiplier::from_coordinates(self.bank, v, in_cone))
    }

    /// Shrinks a coordinate direction until the multiplier sits inside the
    /// cone with margin; used for warm starts and probing.
    pub fn shrink_into_cone(&self, coeffs: &[f64]) -> Option<Multiplier> {
        let mut v = nalgebra::DVector::from_vec(coeffs.to_vec());
        if v.len() != self.bank.range_dim() {
            return None;
        }
        let floor = self.omega.min_eig_over_grid() * 0.5;
        for _ in 0..60 {
            let lambda = self.bank.assemble_from_coordinates(&v);
            if self.barrier_min_eig(&lambda) >= floor {
                return Some(Multiplier::from_coordinates(self.bank, v, true));
            }
            v *= 0.5;
        }
        None
    }

    /// Full estimation: dual solve, reconstruction, moment residual and the
    /// optional source-side map.
    pub fn estimate(&self, opts: &SolveOptions) -> Result<EstimationResult> {
        let outcome = self.solve_dual(opts)?;
        let phi_hat = self.reconstruct_phi(&outcome.multiplier)?;
        let sigma = self.sigma.sigma();
        let moment_residual =
            (self.bank.gamma_apply_values(phi_hat.values()) - sigma).norm() / sigma.norm();
        let phi_xi_hat = match &self.h_inv {
            Some(h) => Some(indirect_spectrum(&phi_hat, h, IndirectDirection::ToSource)?),
            None => None,
        };
        let converged = outcome.converged() && moment_residual <= opts.tol_moment;
        Ok(EstimationResult {
            method: Method::Transport,
            converged,
            status: outcome.status,
            iterations: outcome.iterations,
            grad_norm: outcome.grad_norm,
            dual_value: outcome.objective,
            moment_residual,
            multiplier: outcome.multiplier,
            phi_hat,
            phi_xi_hat,
            message: outcome.message,
        })
    }
}

impl DualModel for TransportProblem<'_> {
    fn bank(&self) -> &FilterBank {
        self.bank
    }

    fn moment_target(&self) -> &RMat {
        self.sigma.sigma()
    }

    fn barrier_min_eig(&self, lambda: &RMat) -> f64 {
        let lambda_c = complexify(lambda);
        let mut min_eig = f64::INFINITY;
        for k in 0..self.bank.grid().n_points() {
            let q = self.omega.value(k) + self.bank.sandwich_complex(&lambda_c, k);
            min_eig = min_eig.min(crate::linalg::hermitian_min_eig(&q));
        }
        min_eig
    }

    fn objective(&self, lambda: &RMat) -> Option<f64> {
        let lambda_c = complexify(lambda);
        let n = self.bank.grid().n_points();
        let mut acc = 0.0;
        for k in 0..n {
            let q = hermitianize(&(self.omega.value(k) + self.bank.sandwich_complex(&lambda_c, k)));
            let eig = q.symmetric_eigen();
            if eig.eigenvalues.iter().any(|&x| x <= BARRIER_EPS) {
                return None;
            }
            let rotated = eig.eigenvectors.adjoint() * &self.weighted_prior[k] * &eig.eigenvectors;
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                acc += rotated[(i, i)].re / ev;
            }
        }
        Some(acc / n as f64 + self.sigma.sigma().dot(lambda))
    }

    fn objective_and_primal(&self, lambda: &RMat) -> Option<(f64, Vec<CMat>)> {
        let lambda_c = complexify(lambda);
        let n = self.bank.grid().n_points();
        let mut acc = 0.0;
        let mut primal = Vec::with_capacity(n);
        for k in 0..n {
            let q = hermitianize(&(self.omega.value(k) + self.bank.sandwich_complex(&lambda_c, k)));
            let eig = q.symmetric_eigen();
            if eig.eigenvalues.iter().any(|&x| x <= BARRIER_EPS) {
                return None;
            }
            let u = &eig.eigenvectors;
            let rotated = u.adjoint() * &self.weighted_prior[k] * u;
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                acc += rotated[(i, i)].re / ev;
            }
            let inv_diag =
                CMat::from_diagonal(&eig.eigenvalues.map(|x| num_complex::Complex::new(1.0 / x, 0.0)));
            let q_inv = u * inv_diag * u.adjoint();
            primal.push(hermitianize(&(&q_inv * &self.weighted_prior[k] * &q_inv)));
        }
        Some((acc / n as f64 + self.sigma.sigma().dot(lambda), primal))
    }
}

/// Direction of the sensor-characteristic congruence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndirectDirection {
    /// `Phi_xi = H Phi H*`, with `H` the pointwise inverse of the evaluated
    /// characteristic.
    ToSource,
    /// `Phi = H^{-1} Phi_xi H^{-*}`.
    ToMeasurement,
}

/// Maps a spectrum through the known sensor characteristic `H^{-1}`.
pub fn indirect_spectrum(
    phi: &MatrixGrid,
    h_inv: &StateSpaceFilter,
    direction: IndirectDirection,
) -> Result<MatrixGrid> {
    let m = phi.dim();
    if h_inv.n_inputs() != m || h_inv.n_outputs() != m {
        return Err(Error::DimensionMismatch(format!(
            "characteristic must be {m}x{m}, got {}x{}",
            h_inv.n_outputs(),
            h_inv.n_inputs()
        )));
    }
    let h_inv_grid = h_inv.eval_transfer(phi.grid())?;
    let n = phi.n_points();
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let e = h_inv_grid.value(k);
        let sigma_min = crate::linalg::min_singular_value(e);
        if sigma_min < 1e-10 {
            return Err(Error::SingularCharacteristic {
                index: k,
                sigma_min,
            });
        }
        let mapped = match direction {
            IndirectDirection::ToSource => {
                let h = e.clone().try_inverse().ok_or(Error::SingularCharacteristic {
                    index: k,
                    sigma_min,
                })?;
                &h * phi.value(k) * h.adjoint()
            }
            IndirectDirection::ToMeasurement => e * phi.value(k) * e.adjoint(),
        };
        values.push(hermitianize(&mapped));
    }
    if phi.real_process() {
        crate::matrix_grid::symmetrize_reflection(&mut values);
    }
    let scale: f64 = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    MatrixGrid::with_coercivity(
        phi.grid().clone(),
        values,
        GridKind::Psd,
        phi.real_process(),
        -1e-12 * (1.0 + scale),
    )
}

/// The weight induced by a sensor characteristic: `Omega = H* H` with
/// `H` the pointwise inverse of the evaluated `H^{-1}`.
pub fn weight_from_characteristic(
    h_inv: &StateSpaceFilter,
    grid: &FrequencyGrid,
) -> Result<MatrixGrid> {
    let h_inv_grid = h_inv.eval_transfer(grid)?;
    let n = grid.n_points();
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let e = h_inv_grid.value(k);
        let sigma_min = crate::linalg::min_singular_value(e);
        if sigma_min < 1e-10 {
            return Err(Error::SingularCharacteristic {
                index: k,
                sigma_min,
            });
        }
        let h = e.clone().try_inverse().ok_or(Error::SingularCharacteristic {
            index: k,
            sigma_min,
        })?;
        values.push(hermitianize(&(h.adjoint() * &h)));
    }
    let scale: f64 = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    MatrixGrid::with_coercivity(
        grid.clone(),
        values,
        GridKind::Weight,
        true,
        1e-12 * (1.0 + scale),
    )
}
