//! Real rational transfer matrices in state-space form.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{spectral_radius, CMat, RMat};
use crate::matrix_grid::{GridKind, MatrixGrid};

/// Condition-number estimate above which a transfer evaluation is rejected.
const COND_LIMIT: f64 = 1e12;

/// A stable rational transfer matrix `H(z) = C (zI - A)^{-1} B + D` with real
/// coefficients.
///
/// `n_states = 0` is allowed and denotes the constant filter `H(z) = D`.
#[derive(Debug, Clone)]
pub struct StateSpaceFilter {
    a: RMat,
    b: RMat,
    c: RMat,
    d: RMat,
}

impl StateSpaceFilter {
    /// Builds a filter, checking dimension consistency and stability
    /// (`spectral radius of A < 1`).
    pub fn new(a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidFilter(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::InvalidFilter(format!(
                "B ({}x{}) and C ({}x{}) must agree with A ({n}x{n})",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::InvalidFilter(format!(
                "D must be {}x{}, got {}x{}",
                c.nrows(),
                b.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidFilter("need at least one input and output".into()));
        }
        let rho = spectral_radius(&a);
        if rho >= 1.0 {
            return Err(Error::UnstableFilter { rho });
        }
        Ok(Self { a, b, c, d })
    }

    /// Constant filter `H(z) = D`.
    pub fn constant(d: RMat) -> Result<Self> {
        let (m_out, m_in) = (d.nrows(), d.ncols());
        Self::new(RMat::zeros(0, 0), RMat::zeros(0, m_in), RMat::zeros(m_out, 0), d)
    }

    pub fn a(&self) -> &RMat {
        &self.a
    }
    pub fn b(&self) -> &RMat {
        &self.b
    }
    pub fn c(&self) -> &RMat {
        &self.c
    }
    pub fn d(&self) -> &RMat {
        &self.d
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    /// Series connection: the returned filter applies `inner` first, then
    /// `self` (i.e. `self(z) * inner(z)`).
    pub fn series(&self, inner: &StateSpaceFilter) -> Result<StateSpaceFilter> {
        if inner.n_outputs() != self.n_inputs() {
            return Err(Error::DimensionMismatch(format!(
                "series connection: inner has {} outputs, outer expects {} inputs",
                inner.n_outputs(),
                self.n_inputs()
            )));
        }
        let (n1, n2) = (self.n_states(), inner.n_states());
        let n = n1 + n2;
        let mut a = RMat::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((0, n1), (n1, n2)).copy_from(&(&self.b * &inner.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&inner.a);
        let mut b = RMat::zeros(n, inner.n_inputs());
        b.view_mut((0, 0), (n1, inner.n_inputs())).copy_from(&(&self.b * &inner.d));
        b.view_mut((n1, 0), (n2, inner.n_inputs())).copy_from(&inner.b);
        let mut c = RMat::zeros(self.n_outputs(), n);
        c.view_mut((0, 0), (self.n_outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.n_outputs(), n2)).copy_from(&(&self.d * &inner.c));
        let d = &self.d * &inner.d;
        StateSpaceFilter::new(a, b, c, d)
    }

    /// Realization of `H(z)^{-1}` for a square filter with invertible `D`:
    /// `(A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1})`.
    ///
    /// Fails when the result is unstable, i.e. when the filter is not
    /// causally invertible.
    pub fn inverse_realization(&self) -> Result<StateSpaceFilter> {
        if self.n_inputs() != self.n_outputs() {
            return Err(Error::InvalidFilter("only square filters can be inverted".into()));
        }
        let d_inv = self.d.clone().try_inverse().ok_or_else(|| {
            Error::InvalidFilter("feedthrough D is singular; filter has no causal inverse".into())
        })?;
        let bd = &self.b * &d_inv;
        let a = &self.a - &bd * &self.c;
        StateSpaceFilter::new(a, bd, -(&d_inv * &self.c), d_inv)
    }

    /// Whether the filter admits a stable causal inverse.
    pub fn is_causally_invertible(&self) -> bool {
        self.inverse_realization().is_ok()
    }

    /// Evaluates `H(e^{j theta})` on every grid point.
    ///
    /// Errors when some `(e^{j theta} I - A)` has a condition estimate above
    /// `1e12` (cannot happen for comfortably stable `A`).
    pub fn eval_transfer(&self, grid: &FrequencyGrid) -> Result<MatrixGrid> {
        let n = self.n_states();
        let values = if n == 0 {
            let d = crate::linalg::complexify(&self.d);
            vec![d; grid.n_points()]
        } else {
            let a_c = crate::linalg::complexify(&self.a);
            let b_c = crate::linalg::complexify(&self.b);
            let c_c = crate::linalg::complexify(&self.c);
            let d_c = crate::linalg::complexify(&self.d);
            let mut values = Vec::with_capacity(grid.n_points());
            for k in 0..grid.n_points() {
                let z = grid.point(k);
                let mut zi_a = -a_c.clone();
                for i in 0..n {
                    zi_a[(i, i)] += z;
                }
                let lu = zi_a.clone().lu();
                let x = lu.solve(&b_c).ok_or(Error::IllConditioned {
                    index: k,
                    cond: f64::INFINITY,
                })?;
                // Cheap condition estimate via Frobenius norms.
                let inv_norm = lu
                    .try_inverse()
                    .map(|inv| inv.norm())
                    .unwrap_or(f64::INFINITY);
                let cond = zi_a.norm() * inv_norm;
                if cond > COND_LIMIT {
                    return Err(Error::IllConditioned { index: k, cond });
                }
                values.push(&c_c * x + &d_c);
            }
            values
        };
        MatrixGrid::new(grid.clone(), values, GridKind::Transfer, true)
    }

    /// Truncated impulse response `h_0 = D`, `h_t = C A^{t-1} B`.
    pub fn impulse_response(&self, len: usize) -> Vec<RMat> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        out.push(self.d.clone());
        if self.n_states() == 0 {
            for _ in 1..len {
                out.push(RMat::zeros(self.n_outputs(), self.n_inputs()));
            }
            return out;
        }
        let mut power = self.b.clone();
        for _ in 1..len {
            out.push(&self.c * &power);
            power = &self.a * &power;
        }
        out
    }
}

/// Serializable description of a state-space filter, row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<RMat> {
    if rows.is_empty() {
        return Ok(RMat::zeros(0, 0));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("ragged rows in matrix '{what}'")));
    }
    Ok(RMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl FilterSpec {
    pub fn to_filter(&self) -> Result<StateSpaceFilter> {
        let a = rows_to_matrix(&self.a, "a")?;
        let mut b = rows_to_matrix(&self.b, "b")?;
        let mut c = rows_to_matrix(&self.c, "c")?;
        let d = rows_to_matrix(&self.d, "d")?;
        // Empty-state specs may leave B/C with zero columns/rows.
        if a.nrows() == 0 {
            b = RMat::zeros(0, d.ncols());
            c = RMat::zeros(d.nrows(), 0);
        }
        StateSpaceFilter::new(a, b, c, d)
    }

    pub fn from_filter(f: &StateSpaceFilter) -> Self {
        Self {
            a: matrix_to_rows(f.a()),
            b: matrix_to_rows(f.b()),
            c: matrix_to_rows(f.c()),
            d: matrix_to_rows(f.d()),
        }
    }
}

/// Complex-valued grid evaluation helper used by tests and oracles: direct
/// summation of the truncated impulse response at one angle.
pub fn impulse_response_transfer(filter: &StateSpaceFilter, theta: f64, terms: usize) -> CMat {
    let h = filter.impulse_response(terms);
    let mut acc = CMat::zeros(filter.n_outputs(), filter.n_inputs());
    for (t, ht) in h.iter().enumerate() {
        let phase = Complex::from_polar(1.0, -theta * t as f64);
        acc += crate::linalg::complexify(ht).scale(1.0) * phase;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_min_eig;

    #[test]
    fn constant_filter_evaluates_to_d() {
        let f = StateSpaceFilter::constant(RMat::identity(2, 2)).unwrap();
        let grid = FrequencyGrid::new(16).unwrap();
        let w = f.eval_transfer(&grid).unwrap();
        for k in 0..16 {
            assert!((w.value(k) - CMat::identity(2, 2)).norm() < 1e-15);
        }
    }

    #[test]
    fn scalar_geometric_series_at_dc() {
        // H(z) = 1/(z - 0.5); at z = 1 this is 2.
        let f = StateSpaceFilter::new(
            RMat::from_row_slice(1, 1, &[0.5]),
            RMat::from_row_slice(1, 1, &[1.0]),
            RMat::from_row_slice(1, 1, &[1.0]),
            RMat::from_row_slice(1, 1, &[0.0]),
        )
        .unwrap();
        let grid = FrequencyGrid::new(8).unwrap();
        let w = f.eval_transfer(&grid).unwrap();
        assert!((w.value(0)[(0, 0)] - Complex::new(2.0, 0.0)).norm() < 1e-14);
    }

    fn fixed_stable_filter() -> StateSpaceFilter {
        // Hand-picked stable 4-state bivariate realization.
        let a = RMat::from_row_slice(
            4,
            4,
            &[
                0.30, 0.20, -0.10, 0.05, //
                -0.15, 0.40, 0.10, -0.20, //
                0.05, -0.10, 0.25, 0.30, //
                0.10, 0.05, -0.20, -0.35,
            ],
        );
        let b = RMat::from_row_slice(4, 2, &[1.0, 0.2, -0.3, 0.8, 0.5, -0.4, 0.1, 0.9]);
        let c = RMat::from_row_slice(2, 4, &[0.7, -0.2, 0.4, 0.1, -0.3, 0.6, 0.2, -0.5]);
        let d = RMat::from_row_slice(2, 2, &[1.0, 0.1, -0.2, 0.9]);
        StateSpaceFilter::new(a, b, c, d).unwrap()
    }

    #[test]
    fn matches_truncated_impulse_response() {
        let f = fixed_stable_filter();
        let rho = f.spectral_radius();
        assert!(rho < 1.0);
        // rho^t < 1e-12
        let terms = (1e-12f64.ln() / rho.ln()).ceil() as usize + 2;
        let grid = FrequencyGrid::new(32).unwrap();
        let w = f.eval_transfer(&grid).unwrap();
        for k in (0..32).step_by(5) {
            let direct = impulse_response_transfer(&f, grid.theta(k), terms);
            assert!(
                (w.value(k) - &direct).norm() < 1e-8,
                "mismatch at k={k}: {}",
                (w.value(k) - &direct).norm()
            );
        }
    }

    #[test]
    fn real_coefficients_give_conjugate_symmetry() {
        let f = fixed_stable_filter();
        let grid = FrequencyGrid::new(64).unwrap();
        let w = f.eval_transfer(&grid).unwrap();
        for k in 0..64 {
            let r = grid.reflected_index(k);
            let conj = w.value(k).map(|z| z.conj());
            assert!((w.value(r) - conj).norm() < 1e-12);
        }
    }

    #[test]
    fn series_connection_multiplies_transfers() {
        let f = fixed_stable_filter();
        let g = StateSpaceFilter::new(
            RMat::from_row_slice(1, 1, &[0.6]),
            RMat::from_row_slice(1, 2, &[1.0, -0.5]),
            RMat::from_row_slice(2, 1, &[0.5, 1.0]),
            RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.2, 1.0]),
        )
        .unwrap();
        let grid = FrequencyGrid::new(16).unwrap();
        let combined = f.series(&g).unwrap().eval_transfer(&grid).unwrap();
        let wf = f.eval_transfer(&grid).unwrap();
        let wg = g.eval_transfer(&grid).unwrap();
        for k in 0..16 {
            let product = wf.value(k) * wg.value(k);
            assert!((combined.value(k) - product).norm() < 1e-11);
        }
    }

    #[test]
    fn inverse_realization_matches_pointwise_inverse() {
        let f = fixed_stable_filter();
        let inv = f.inverse_realization().unwrap();
        let grid = FrequencyGrid::new(32).unwrap();
        let wf = f.eval_transfer(&grid).unwrap();
        let wi = inv.eval_transfer(&grid).unwrap();
        for k in 0..32 {
            let pointwise = wf.value(k).clone().try_inverse().unwrap();
            assert!((wi.value(k) - pointwise).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_unstable() {
        let r = StateSpaceFilter::new(
            RMat::from_row_slice(1, 1, &[1.01]),
            RMat::from_row_slice(1, 1, &[1.0]),
            RMat::from_row_slice(1, 1, &[1.0]),
            RMat::from_row_slice(1, 1, &[0.0]),
        );
        assert!(matches!(r, Err(Error::UnstableFilter { .. })));
    }

    #[test]
    fn psd_of_real_filter_is_coercive_here() {
        let f = fixed_stable_filter();
        let grid = FrequencyGrid::new(64).unwrap();
        let w = f.eval_transfer(&grid).unwrap();
        let phi = crate::matrix_grid::psd_from_factor(&w).unwrap();
        for k in 0..64 {
            assert!(hermitian_min_eig(phi.value(k)) > 0.0);
        }
    }
}
