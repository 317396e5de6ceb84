//! Weighted transportation distance between matrix power spectral densities.
//!
//! For spectra `Phi_x`, `Phi_y` and a coercive Hermitian weight `Omega` the
//! squared distance is
//!
//! ```text
//! d^2 = tr I(Omega Phi_x) + tr I(Omega Phi_y)
//!       - 2 tr I((Phi_y^{1/2} Omega Phi_x Omega Phi_y^{1/2})^{1/2})
//! ```
//!
//! with `I(.)` the normalized unit-circle integral. With `Omega = I` this is
//! the Hellinger distance between multivariate spectral densities; on
//! constant spectra it reduces to the Gaussian Bures-Wasserstein distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    complexify, hermitian_min_eig, hermitian_sqrt, hermitianize, CMat, RMat, SqrtMode,
};
use crate::matrix_grid::{GridKind, MatrixGrid};

/// Squared-distance breakdown into the three trace-integral terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d: f64,
    pub d_squared: f64,
    pub term_x: f64,
    pub term_y: f64,
    pub term_cross: f64,
    pub n_points: usize,
}

impl DistanceReport {
    fn from_accumulated(raw: f64, term_x: f64, term_y: f64, term_cross: f64, n_points: usize) -> Self {
        // Quadrature noise can push the true nonnegative quantity slightly
        // below zero.
        debug_assert!(raw > -1e-9 * (1.0 + term_x.abs() + term_y.abs()));
        let d_squared = raw.max(0.0);
        Self {
            d: d_squared.sqrt(),
            d_squared,
            term_x,
            term_y,
            term_cross,
            n_points,
        }
    }

    /// Gap between the stored `d_squared` and its own three terms; nonzero
    /// only through the clamp at zero.
    pub fn term_residual(&self) -> f64 {
        (self.term_x + self.term_y - 2.0 * self.term_cross - self.d_squared).abs()
    }
}

fn real_trace(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn check_metric_inputs(phi_x: &MatrixGrid, phi_y: &MatrixGrid, omega: &MatrixGrid) -> Result<()> {
    phi_x.compatible_with(phi_y)?;
    phi_x.compatible_with(omega)?;
    for (grid, name) in [(phi_x, "phi_x"), (phi_y, "phi_y")] {
        if !matches!(grid.kind(), GridKind::Psd | GridKind::Weight) {
            return Err(Error::DimensionMismatch(format!(
                "{name} must be a psd grid, got {:?}",
                grid.kind()
            )));
        }
    }
    Ok(())
}

/// The weighted transportation (weighted Hellinger) distance.
pub fn transport_distance(
    phi_x: &MatrixGrid,
    phi_y: &MatrixGrid,
    omega: &MatrixGrid,
) -> Result<DistanceReport> {
    check_metric_inputs(phi_x, phi_y, omega)?;
    let n = phi_x.n_points();
    let mut term_x = 0.0;
    let mut term_y = 0.0;
    let mut term_cross = 0.0;
    let mut raw = 0.0;
    for k in 0..n {
        let w = omega.value(k);
        let px = phi_x.value(k);
        let py = phi_y.value(k);
        let tx = real_trace(&(w * px));
        let ty = real_trace(&(w * py));
        // When the samples coincide the cross term equals (tx + ty)/2
        // exactly; going through the square root would only add rounding
        // noise that the outer cancellation amplifies.
        let cross = if (px - py).norm() <= 1e-14 * (1.0 + px.norm()) {
            0.5 * (tx + ty)
        } else {
            let sy = hermitian_sqrt(py, SqrtMode::Sqrt)?;
            let inner = hermitianize(&(&sy * w * px * w * &sy));
            real_trace(&hermitian_sqrt(&inner, SqrtMode::Sqrt)?)
        };
        term_x += tx;
        term_y += ty;
        term_cross += cross;
        // Accumulate the squared distance at frequency scale, where the
        // cancellation is benign.
        raw += tx + ty - 2.0 * cross;
    }
    let scale = 1.0 / n as f64;
    Ok(DistanceReport::from_accumulated(
        raw * scale,
        term_x * scale,
        term_y * scale,
        term_cross * scale,
        n,
    ))
}

/// Hellinger distance: the transport distance with identity weight.
pub fn hellinger_distance(phi_x: &MatrixGrid, phi_y: &MatrixGrid) -> Result<DistanceReport> {
    let omega = MatrixGrid::identity_weight(phi_x.grid().clone(), phi_x.shape().0);
    transport_distance(phi_x, phi_y, &omega)
}

/// Squared `Omega`-weighted `L^2` gap between two square factor grids:
/// the integral of `tr((W_a - W_b)* Omega (W_a - W_b))`.
pub fn weighted_factor_gap(w_a: &MatrixGrid, w_b: &MatrixGrid, omega: &MatrixGrid) -> Result<f64> {
    w_a.compatible_with(w_b)?;
    w_a.compatible_with(omega)?;
    let n = w_a.n_points();
    let mut acc = 0.0;
    for k in 0..n {
        let diff = w_a.value(k) - w_b.value(k);
        acc += real_trace(&(diff.adjoint() * omega.value(k) * &diff));
    }
    Ok(acc / n as f64)
}

/// Optimal coupling factor: the square factor of `Phi_y` closest to `w_x`
/// in the weighted `L^2` sense,
/// `W_y = Phi_y^{1/2} (Phi_y^{1/2} Omega Phi_x Omega Phi_y^{1/2})^{-1/2} Phi_y^{1/2} Omega W_x`.
///
/// `w_x` must itself be a square factor of `phi_x` on the grid.
pub fn optimal_coupling_factor(
    phi_x: &MatrixGrid,
    phi_y: &MatrixGrid,
    omega: &MatrixGrid,
    w_x: &MatrixGrid,
) -> Result<MatrixGrid> {
    check_metric_inputs(phi_x, phi_y, omega)?;
    phi_x.compatible_with(w_x)?;
    let n = phi_x.n_points();
    // Factor precondition: w_x w_x* = phi_x pointwise.
    for k in 0..n {
        let residual =
            (w_x.value(k) * w_x.value(k).adjoint() - phi_x.value(k)).norm();
        if residual > 1e-8 * (1.0 + phi_x.value(k).norm()) {
            return Err(Error::NotAFactor {
                index: k,
                residual,
            });
        }
    }
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let w = omega.value(k);
        let px = phi_x.value(k);
        let sy = hermitian_sqrt(phi_y.value(k), SqrtMode::Sqrt)?;
        let inner = hermitianize(&(&sy * w * px * w * &sy));
        let inner_inv_root = hermitian_sqrt(&inner, SqrtMode::InvSqrt)?;
        values.push(&sy * inner_inv_root * &sy * w * w_x.value(k));
    }
    MatrixGrid::new(
        phi_y.grid().clone(),
        values,
        GridKind::Transfer,
        w_x.real_process() && phi_x.real_process() && phi_y.real_process() && omega.real_process(),
    )
}

/// Single-frequency squared transport distance between constant Gaussian
/// covariances; with `weight = I` this is the squared Bures-Wasserstein
/// distance between zero-mean Gaussians.
pub fn static_gaussian_w2(sigma_x: &RMat, sigma_y: &RMat, weight: &RMat) -> Result<f64> {
    let m = sigma_x.nrows();
    for (mat, name) in [(sigma_x, "sigma_x"), (sigma_y, "sigma_y"), (weight, "weight")] {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "{name} must be {m}x{m}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }
    let cx = complexify(sigma_x);
    let cy = complexify(sigma_y);
    let cw = complexify(weight);
    for (mat, floor) in [(&cx, -1e-10), (&cy, -1e-10), (&cw, 1e-12)] {
        let min_eig = hermitian_min_eig(mat);
        if min_eig < floor * (1.0 + mat.norm()) {
            return Err(Error::Indefinite {
                eigenvalue: min_eig,
                tolerance: floor.abs(),
            });
        }
    }
    let term_x = real_trace(&(&cw * &cx));
    let term_y = real_trace(&(&cw * &cy));
    let cross = if (&cx - &cy).norm() <= 1e-14 * (1.0 + cx.norm()) {
        0.5 * (term_x + term_y)
    } else {
        let sy = hermitian_sqrt(&cy, SqrtMode::Sqrt)?;
        let inner = hermitianize(&(&sy * &cw * &cx * &cw * &sy));
        real_trace(&hermitian_sqrt(&inner, SqrtMode::Sqrt)?)
    };
    Ok((term_x + term_y - 2.0 * cross).max(0.0))
}
