//! Dense Hermitian matrix helpers shared across the crate.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex<f64>>;
pub type RMat = DMatrix<f64>;

/// Which root to take in [`hermitian_sqrt`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtMode {
    /// Principal (Hermitian psd) square root.
    Sqrt,
    /// Principal square root of the inverse.
    InvSqrt,
}

/// Frobenius norm of the anti-Hermitian part of `m`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `(m + m*)/2`.
pub fn hermitianize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitianize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn hermitian_min_eig(m: &CMat) -> f64 {
    hermitianize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Applies a scalar function to the eigenvalues of a Hermitian matrix,
/// `f(M) = U diag(f(lambda)) U*`.
pub fn hermitian_apply(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = hermitianize(m).symmetric_eigen();
    let u = eig.eigenvectors;
    let d = CMat::from_diagonal(
        &eig.eigenvalues.map(|x| Complex::new(f(x), 0.0)),
    );
    &u * d * u.adjoint()
}

/// Principal Hermitian square root (or inverse square root) of a Hermitian
/// positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-10*||M||, 0)` are treated as rounding noise and
/// clamped to zero in `Sqrt` mode; anything further below zero is rejected
/// as genuinely indefinite. `InvSqrt` requires strict coercivity.
pub fn hermitian_sqrt(m: &CMat, mode: SqrtMode) -> Result<CMat> {
    hermitian_sqrt_with(m, mode, 1e-10)
}

/// [`hermitian_sqrt`] with an explicit coercivity floor for `InvSqrt`.
pub fn hermitian_sqrt_with(m: &CMat, mode: SqrtMode, eps_coercive: f64) -> Result<CMat> {
    let norm = m.norm();
    let herm_tol = 1e-12 * (1.0 + norm);
    let residual = hermitian_residual(m);
    if residual > herm_tol {
        return Err(Error::NotHermitian {
            residual,
            tolerance: herm_tol,
        });
    }
    let clamp_tol = 1e-10 * norm.max(1e-300);
    let eig = hermitianize(m).symmetric_eigen();
    let u = eig.eigenvectors;
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in eig.eigenvalues.iter() {
        match mode {
            SqrtMode::Sqrt => {
                if lambda < -clamp_tol {
                    return Err(Error::Indefinite {
                        eigenvalue: lambda,
                        tolerance: clamp_tol,
                    });
                }
                vals.push(lambda.max(0.0).sqrt());
            }
            SqrtMode::InvSqrt => {
                if lambda < eps_coercive {
                    return Err(Error::Indefinite {
                        eigenvalue: lambda,
                        tolerance: eps_coercive,
                    });
                }
                vals.push(1.0 / lambda.sqrt());
            }
        }
    }
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.into_iter().map(|x| Complex::new(x, 0.0)),
    ));
    Ok(&u * d * u.adjoint())
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(a: &RMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Smallest singular value of a complex matrix.
pub fn min_singular_value(m: &CMat) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Embeds a real matrix into the complex field.
pub fn complexify(m: &RMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| Complex::new(m[(i, j)], 0.0))
}
