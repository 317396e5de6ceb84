//! Uniform angular grid on the unit circle.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of the unit circle: `theta_k = 2*pi*k / n_points`,
/// `k = 0..n_points-1`.
///
/// All spectra, weights and transfer functions in this crate live on such a
/// grid; integration against the normalized Lebesgue measure becomes the
/// plain average over grid points, which is exact for trigonometric
/// polynomials of degree below `n_points`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_points: usize,
}

impl FrequencyGrid {
    /// Default grid size; resolves rational spectra of the orders used in the
    /// simulation studies with large margin.
    pub const DEFAULT_POINTS: usize = 2048;

    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 4 {
            return Err(Error::Config(format!(
                "frequency grid needs at least 4 points, got {n_points}"
            )));
        }
        Ok(Self { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Angle of the `k`-th grid point in radians, in `[0, 2*pi)`.
    pub fn theta(&self, k: usize) -> f64 {
        debug_assert!(k < self.n_points);
        2.0 * std::f64::consts::PI * (k as f64) / (self.n_points as f64)
    }

    /// Unit-circle point `e^{j*theta_k}`.
    pub fn point(&self, k: usize) -> Complex<f64> {
        Complex::from_polar(1.0, self.theta(k))
    }

    /// All angles in increasing order.
    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.theta(k)).collect()
    }

    /// Index of the reflected point `2*pi - theta_k` (identical grid point
    /// for `k = 0`).
    pub fn reflected_index(&self, k: usize) -> usize {
        (self.n_points - k) % self.n_points
    }
}

impl PartialEq for FrequencyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points
    }
}

impl Eq for FrequencyGrid {}
