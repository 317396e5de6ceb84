//! Projected quasi-Newton core shared by the dual estimators.
//!
//! Both dual problems minimize a smooth strictly convex functional over the
//! open cone of multipliers keeping a frequency-dependent barrier matrix
//! positive definite, restricted to `Range Gamma`. The solver runs BFGS on
//! the range-basis coordinates with a backtracking Armijo line search; steps
//! that leave the cone are treated as rejected trials, never as errors. The
//! projected gradient is `Sigma - Gamma(Phi(Lambda))`, so its norm directly
//! certifies the primal moment constraint.

use nalgebra::DVector;
use serde::Serialize;

use crate::bank::FilterBank;
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};

/// Positivity floor for the barrier matrices: multipliers with smaller
/// minimum eigenvalue over the grid count as outside the cone.
pub const BARRIER_EPS: f64 = 1e-12;

/// Knobs of the dual solves.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Convergence threshold: projected-gradient norm at most
    /// `tol_grad * (1 + ||Sigma||)`.
    pub tol_grad: f64,
    /// Moment-residual threshold that a converged estimate must satisfy.
    pub tol_moment: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Maximum step halvings per line search.
    pub max_backtracks: usize,
    /// Optional warm start in range-basis coordinates.
    pub initial_coeffs: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-8,
            tol_moment: 1e-6,
            max_iter: 500,
            armijo_c1: 1e-4,
            max_backtracks: 60,
            initial_coeffs: None,
        }
    }
}

/// How a dual solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// No acceptable step found; the iterate sits against the cone boundary
    /// or at the numerical floor.
    Stalled,
    /// Unbounded multiplier growth towards the boundary; the moment target
    /// is (numerically) infeasible.
    Infeasible,
}

/// A symmetric multiplier expressed in the range basis.
#[derive(Debug, Clone)]
pub struct Multiplier {
    coeffs: DVector<f64>,
    lambda: RMat,
    in_positive_cone: bool,
}

impl Multiplier {
    pub(crate) fn from_coordinates(
        bank: &FilterBank,
        coeffs: DVector<f64>,
        in_positive_cone: bool,
    ) -> Self {
        let lambda = bank.assemble_from_coordinates(&coeffs);
        Self {
            coeffs,
            lambda,
            in_positive_cone,
        }
    }

    /// The zero multiplier, always interior for coercive weights/priors.
    pub fn zero(bank: &FilterBank) -> Self {
        Self::from_coordinates(bank, DVector::zeros(bank.range_dim()), true)
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// The assembled symmetric matrix.
    pub fn lambda(&self) -> &RMat {
        &self.lambda
    }

    pub fn in_positive_cone(&self) -> bool {
        self.in_positive_cone
    }

    /// Frobenius norm (equals the coordinate norm in the orthonormal
    /// basis).
    pub fn norm(&self) -> f64 {
        self.lambda.norm()
    }
}

impl Serialize for Multiplier {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            coeffs: &'a [f64],
            norm: f64,
            in_positive_cone: bool,
        }
        Repr {
            coeffs: self.coeffs.as_slice(),
            norm: self.norm(),
            in_positive_cone: self.in_positive_cone,
        }
        .serialize(serializer)
    }
}

/// Result of a dual solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub multiplier: Multiplier,
    pub status: SolveStatus,
    /// Accepted quasi-Newton steps.
    pub iterations: usize,
    /// Final projected-gradient norm.
    pub grad_norm: f64,
    /// Final dual objective value.
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub message: Option<String>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// A dual problem as seen by the solver.
pub(crate) trait DualModel {
    fn bank(&self) -> &FilterBank;
    /// The moment target `Sigma`.
    fn moment_target(&self) -> &RMat;
    /// Smallest barrier eigenvalue over the grid at this multiplier.
    fn barrier_min_eig(&self, lambda: &RMat) -> f64;
    /// Dual objective; `None` outside the cone.
    fn objective(&self, lambda: &RMat) -> Option<f64>;
    /// Objective together with the pointwise primal reconstruction
    /// `Phi(Lambda)`; `None` outside the cone.
    fn objective_and_primal(&self, lambda: &RMat) -> Option<(f64, Vec<CMat>)>;
}

/// Gradient in range coordinates: `Sigma - Gamma(Phi(Lambda))` projected.
fn gradient_coords(model: &dyn DualModel, primal: &[CMat]) -> DVector<f64> {
    let g_mat = model.moment_target() - model.bank().gamma_apply_values(primal);
    model.bank().range_coordinates(&g_mat)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &dyn DualModel,
    coeffs: DVector<f64>,
    status: SolveStatus,
    iterations: usize,
    grad_norm: f64,
    objective: f64,
    objective_trace: Vec<f64>,
    message: Option<String>,
) -> SolveOutcome {
    let lambda = model.bank().assemble_from_coordinates(&coeffs);
    let in_cone = model.barrier_min_eig(&lambda) > 0.0;
    SolveOutcome {
        multiplier: Multiplier::from_coordinates(model.bank(), coeffs, in_cone),
        status,
        iterations,
        grad_norm,
        objective,
        objective_trace,
        message,
    }
}

pub(crate) fn solve_projected_bfgs(
    model: &dyn DualModel,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    let bank = model.bank();
    let r = bank.range_dim();
    let tol = opts.tol_grad * (1.0 + model.moment_target().norm());

    let mut coeffs = match &opts.initial_coeffs {
        Some(c) => {
            if c.len() != r {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has {} coordinates, range dimension is {r}",
                    c.len()
                )));
            }
            DVector::from_vec(c.clone())
        }
        None => DVector::zeros(r),
    };
    let mut lambda = bank.assemble_from_coordinates(&coeffs);
    let (mut obj, primal) = model.objective_and_primal(&lambda).ok_or_else(|| {
        Error::BoundaryViolation {
            min_eig: model.barrier_min_eig(&lambda),
        }
    })?;
    let mut grad = gradient_coords(model, &primal);
    let mut trace = vec![obj];
    let mut h_inv = RMat::identity(r, r);
    let mut iterations = 0usize;

    loop {
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(finish(model, coeffs, SolveStatus::Converged, iterations, grad_norm, obj, trace, None));
        }
        if iterations >= opts.max_iter {
            let message = format!("gradient norm {grad_norm:.3e} above tolerance {tol:.3e}");
            return Ok(finish(
                model,
                coeffs,
                SolveStatus::MaxIterations,
                iterations,
                grad_norm,
                obj,
                trace,
                Some(message),
            ));
        }

        let mut direction = -(&h_inv * &grad);
        if direction.dot(&grad) >= 0.0 {
            // Curvature got corrupted; restart from steepest descent.
            h_inv = RMat::identity(r, r);
            direction = -grad.clone();
        }
        let slope = grad.dot(&direction);

        // Near the optimum the requested Armijo decrease drops below the
        // floating-point resolution of the objective; such steps are
        // accepted as long as the objective does not measurably increase,
        // letting the gradient keep contracting.
        let rounding_floor = 1e-13 * (1.0 + obj.abs());
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = &coeffs + &direction * alpha;
            let trial_lambda = bank.assemble_from_coordinates(&trial);
            if let Some(step) = model.objective_and_primal(&trial_lambda) {
                let wanted = opts.armijo_c1 * alpha * slope;
                let sufficient = step.0 <= obj + wanted
                    || (wanted.abs() <= rounding_floor && step.0 <= obj + rounding_floor);
                if sufficient {
                    accepted = Some((trial, step.0, step.1));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((new_coeffs, new_obj, new_primal)) = accepted else {
            let lambda_norm = lambda.norm();
            let (status, message) = if lambda_norm > 1e8 {
                (
                    SolveStatus::Infeasible,
                    format!(
                        "multiplier norm {lambda_norm:.3e} diverging against the cone boundary; \
                         the moment target looks infeasible"
                    ),
                )
            } else {
                (
                    SolveStatus::Stalled,
                    format!(
                        "no acceptable step below 2^-{}; gradient norm {grad_norm:.3e}",
                        opts.max_backtracks
                    ),
                )
            };
            return Ok(finish(model, coeffs, status, iterations, grad_norm, obj, trace, Some(message)));
        };

        let new_grad = gradient_coords(model, &new_primal);
        let step = &new_coeffs - &coeffs;
        let grad_change = &new_grad - &grad;
        let curvature = step.dot(&grad_change);
        if curvature > 1e-12 * step.norm() * grad_change.norm() {
            let rho = 1.0 / curvature;
            let identity = RMat::identity(r, r);
            let left = &identity - (&step * grad_change.transpose()).scale(rho);
            h_inv = &left * h_inv * left.transpose() + (&step * step.transpose()).scale(rho);
        }
        coeffs = new_coeffs;
        lambda = bank.assemble_from_coordinates(&coeffs);
        obj = new_obj;
        grad = new_grad;
        trace.push(obj);
        iterations += 1;
    }
}
