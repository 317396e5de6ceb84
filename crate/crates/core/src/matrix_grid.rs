//! Matrix-valued functions sampled on the frequency grid.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{hermitian_min_eig, hermitian_residual, hermitianize, CMat};

/// Default coercivity floor for psd/weight grids.
pub const DEFAULT_COERCIVITY: f64 = 1e-10;

/// Tolerance for the real-process reflection symmetry check.
const REAL_PROCESS_TOL: f64 = 1e-10;

/// What a [`MatrixGrid`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Transfer-function samples; arbitrary complex matrices, possibly
    /// rectangular.
    Transfer,
    /// A power spectral density: Hermitian, coercive, square.
    Psd,
    /// A weight function: Hermitian, coercive, square.
    Weight,
}

/// Samples of a matrix function on a [`FrequencyGrid`].
///
/// For `Psd`/`Weight` kinds every sample must be Hermitian with smallest
/// eigenvalue at least the coercivity floor. When `real_process` is set the
/// samples must satisfy the reflection symmetry of spectra of real-valued
/// processes (`value(2pi - theta) = value(theta)^T` for Hermitian kinds,
/// complex conjugation for transfer kind).
#[derive(Debug, Clone)]
pub struct MatrixGrid {
    grid: FrequencyGrid,
    kind: GridKind,
    real_process: bool,
    values: Vec<CMat>,
}

impl MatrixGrid {
    /// Validating constructor with the default coercivity floor.
    pub fn new(
        grid: FrequencyGrid,
        values: Vec<CMat>,
        kind: GridKind,
        real_process: bool,
    ) -> Result<Self> {
        Self::with_coercivity(grid, values, kind, real_process, DEFAULT_COERCIVITY)
    }

    /// Validating constructor with an explicit coercivity floor for
    /// `Psd`/`Weight` kinds.
    pub fn with_coercivity(
        grid: FrequencyGrid,
        values: Vec<CMat>,
        kind: GridKind,
        real_process: bool,
        eps_coercive: f64,
    ) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        let (rows, cols) = (values[0].nrows(), values[0].ncols());
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("empty matrix samples".into()));
        }
        if values.iter().any(|v| v.nrows() != rows || v.ncols() != cols) {
            return Err(Error::DimensionMismatch(
                "all samples must share one shape".into(),
            ));
        }
        if matches!(kind, GridKind::Psd | GridKind::Weight) {
            if rows != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{kind:?} samples must be square, got {rows}x{cols}"
                )));
            }
            for (k, v) in values.iter().enumerate() {
                let tol = 1e-10 * (1.0 + v.norm());
                let residual = hermitian_residual(v);
                if residual > tol {
                    return Err(Error::NotHermitian {
                        residual,
                        tolerance: tol,
                    });
                }
                let min_eig = hermitian_min_eig(v);
                // Also traps NaN.
                if !(min_eig >= eps_coercive) {
                    return Err(Error::NotCoercive {
                        index: k,
                        theta: grid.theta(k),
                        min_eig,
                        required: eps_coercive,
                    });
                }
            }
        }
        let out = Self {
            grid,
            kind,
            real_process,
            values,
        };
        if real_process {
            out.check_real_process_symmetry()?;
        }
        Ok(out)
    }

    fn check_real_process_symmetry(&self) -> Result<()> {
        for k in 0..self.grid.n_points() {
            let r = self.grid.reflected_index(k);
            let partner = match self.kind {
                GridKind::Transfer => self.values[k].map(|z| z.conj()),
                GridKind::Psd | GridKind::Weight => self.values[k].transpose(),
            };
            let diff = (&self.values[r] - partner).norm();
            let scale = 1.0 + self.values[k].norm();
            if diff > REAL_PROCESS_TOL * scale {
                return Err(Error::GridMismatch(format!(
                    "real-process symmetry violated at index {k}: residual {diff:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Constant grid `value` at every frequency.
    pub fn constant(grid: FrequencyGrid, value: CMat, kind: GridKind) -> Result<Self> {
        let real = value.iter().all(|z| z.im == 0.0);
        let n = grid.n_points();
        Self::new(grid, vec![value; n], kind, real)
    }

    /// Identity weight grid of dimension `m`.
    pub fn identity_weight(grid: FrequencyGrid, m: usize) -> Self {
        let n = grid.n_points();
        Self {
            grid,
            kind: GridKind::Weight,
            real_process: true,
            values: vec![CMat::identity(m, m); n],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }
    pub fn kind(&self) -> GridKind {
        self.kind
    }
    pub fn real_process(&self) -> bool {
        self.real_process
    }
    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.values[0].nrows(), self.values[0].ncols())
    }

    /// Dimension of square grids.
    pub fn dim(&self) -> usize {
        debug_assert_eq!(self.values[0].nrows(), self.values[0].ncols());
        self.values[0].nrows()
    }

    pub fn value(&self, k: usize) -> &CMat {
        &self.values[k]
    }
    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    /// Checks that `other` lives on the same grid with the same square
    /// dimension.
    pub fn compatible_with(&self, other: &MatrixGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{} vs {} points",
                self.n_points(),
                other.n_points()
            )));
        }
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Smallest Hermitian-part eigenvalue over the whole grid.
    pub fn min_eig_over_grid(&self) -> f64 {
        self.values
            .iter()
            .map(hermitian_min_eig)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MatrixGridJson::try_from(self)?)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MatrixGridJson::try_from(self)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: MatrixGridJson = serde_json::from_str(text)?;
        repr.into_grid()
    }

    pub fn write_json_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Serialize for MatrixGrid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixGridJson::try_from(self)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatrixGrid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        MatrixGridJson::deserialize(deserializer)?
            .into_grid()
            .map_err(serde::de::Error::custom)
    }
}

/// Wire format: `values[k]` is the row-major `m*m` list of `[re, im]` pairs.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixGridJson {
    n_points: usize,
    m: usize,
    kind: GridKind,
    real_process: bool,
    values: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<&MatrixGrid> for MatrixGridJson {
    type Error = Error;

    fn try_from(g: &MatrixGrid) -> Result<Self> {
        let (rows, cols) = g.shape();
        if rows != cols {
            return Err(Error::DimensionMismatch(
                "only square matrix grids have a JSON form".into(),
            ));
        }
        let values = g
            .values
            .iter()
            .map(|v| {
                let mut flat = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for j in 0..cols {
                        flat.push([v[(i, j)].re, v[(i, j)].im]);
                    }
                }
                flat
            })
            .collect();
        Ok(Self {
            n_points: g.n_points(),
            m: rows,
            kind: g.kind,
            real_process: g.real_process,
            values,
        })
    }
}

impl MatrixGridJson {
    fn into_grid(self) -> Result<MatrixGrid> {
        let grid = FrequencyGrid::new(self.n_points)?;
        let m = self.m;
        if self.values.len() != self.n_points {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                self.n_points,
                self.values.len()
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for flat in &self.values {
            if flat.len() != m * m {
                return Err(Error::DimensionMismatch(format!(
                    "expected {} entries per sample, got {}",
                    m * m,
                    flat.len()
                )));
            }
            values.push(CMat::from_fn(m, m, |i, j| {
                let [re, im] = flat[i * m + j];
                Complex::new(re, im)
            }));
        }
        MatrixGrid::new(grid, values, self.kind, self.real_process)
    }
}

/// Restores the reflection symmetry `M(2pi - theta) = M(theta)^T` of
/// Hermitian-kind samples exactly by averaging reflection partners.
///
/// Pointwise rational evaluation preserves the symmetry bitwise, but
/// eigendecomposition-based reconstructions drift by rounding; averaging
/// removes that drift without bias (the transpose of a psd matrix is psd).
pub fn symmetrize_reflection(values: &mut [CMat]) {
    let n = values.len();
    for k in 0..=n / 2 {
        let r = (n - k) % n;
        if r == k {
            let avg = (&values[k] + values[k].transpose()).scale(0.5);
            values[k] = avg;
        } else {
            let avg = (&values[k] + values[r].transpose()).scale(0.5);
            values[r] = avg.transpose();
            values[k] = avg;
        }
    }
}

/// Pointwise spectral density `Phi = W W*` from a square transfer-function
/// grid. Coercivity is verified after the fact and violations are reported
/// with the offending frequency.
pub fn psd_from_factor(w: &MatrixGrid) -> Result<MatrixGrid> {
    psd_from_factor_with(w, DEFAULT_COERCIVITY)
}

/// [`psd_from_factor`] with an explicit coercivity floor.
pub fn psd_from_factor_with(w: &MatrixGrid, eps_coercive: f64) -> Result<MatrixGrid> {
    let (rows, cols) = w.shape();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!(
            "square factor required, got {rows}x{cols}"
        )));
    }
    let values: Vec<CMat> = w
        .values()
        .iter()
        .map(|v| hermitianize(&(v * v.adjoint())))
        .collect();
    MatrixGrid::with_coercivity(
        w.grid().clone(),
        values,
        GridKind::Psd,
        w.real_process(),
        eps_coercive,
    )
}

/// Average of the samples: the normalized unit-circle integral, exact for
/// trigonometric polynomials of degree below `n_points`.
pub fn integrate_grid(f: &MatrixGrid) -> CMat {
    integrate_values(f.values())
}

/// [`integrate_grid`] on raw sample storage.
pub fn integrate_values(values: &[CMat]) -> CMat {
    let mut acc = CMat::zeros(values[0].nrows(), values[0].ncols());
    for v in values {
        acc += v;
    }
    acc.unscale(values.len() as f64)
}
