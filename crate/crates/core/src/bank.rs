//! Bank of filters `G(z) = (zI - A)^{-1} B`, the moment map
//! `Gamma: Phi -> I(G Phi G*)`, and the geometry of its range.
//!
//! The dual estimators search for a symmetric multiplier inside
//! `Range Gamma`; the orthonormal basis of that subspace (under the trace
//! inner product) is computed once per bank from the sampled linear map
//! `Lambda -> G* Lambda G`: its null space is the orthogonal complement of
//! the range.

use nalgebra::DVector;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{complexify, spectral_radius, CMat, RMat};
use crate::matrix_grid::MatrixGrid;

/// Singular values below `RANK_CUT * sigma_max` count as zero when splitting
/// the sampled map into range and null space.
const RANK_CUT: f64 = 1e-9;

/// Required ratio between the smallest retained and the largest discarded
/// singular value.
const RANK_GAP: f64 = 1e3;

/// A reachable filter bank with its grid evaluation and the orthonormal
/// basis of `Range Gamma`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    a: RMat,
    b: RMat,
    grid: FrequencyGrid,
    /// `G(e^{j theta_k})`, `n x m` per frequency.
    grid_eval: Vec<CMat>,
    /// Adjoints `G(e^{j theta_k})*`, cached for the solver hot path.
    grid_eval_adj: Vec<CMat>,
    /// Orthonormal symmetric matrices spanning `Range Gamma`.
    range_basis: Vec<RMat>,
    /// Orthonormal symmetric matrices spanning `[Range Gamma]^perp`.
    null_basis: Vec<RMat>,
}

impl FilterBank {
    /// Builds a bank from `(A, B)`, evaluating `G` on the grid and computing
    /// the range basis eagerly.
    ///
    /// Requires `A` stable, `B` full column rank with `n > m >= 1`, and
    /// `(A, B)` reachable.
    pub fn new(a: RMat, b: RMat, grid: FrequencyGrid) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n {
            return Err(Error::InvalidBank(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::InvalidBank(format!(
                "B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        if m == 0 || n <= m {
            return Err(Error::InvalidBank(format!(
                "need n > m >= 1, got n={n}, m={m}"
            )));
        }
        let rho = spectral_radius(&a);
        if rho >= 1.0 {
            return Err(Error::UnstableFilter { rho });
        }
        let b_rank = b.clone().rank(1e-10 * (1.0 + b.norm()));
        if b_rank != m {
            return Err(Error::InvalidBank(format!(
                "B must have full column rank {m}, got rank {b_rank}"
            )));
        }
        // Reachability matrix [B, AB, ..., A^{n-1}B].
        let mut reach = RMat::zeros(n, n * m);
        let mut power = b.clone();
        for blk in 0..n {
            reach.view_mut((0, blk * m), (n, m)).copy_from(&power);
            power = &a * &power;
        }
        let reach_rank = reach.clone().rank(1e-10 * (1.0 + reach.norm()));
        if reach_rank != n {
            return Err(Error::InvalidBank(format!(
                "(A, B) not reachable: reachability rank {reach_rank} < {n}"
            )));
        }

        let grid_eval = eval_bank(&a, &b, &grid)?;
        let grid_eval_adj = grid_eval.iter().map(|g| g.adjoint()).collect();
        let (range_basis, null_basis) = compute_range_split(&grid_eval, n, m, grid.n_points())?;

        let bank = Self {
            a,
            b,
            grid,
            grid_eval,
            grid_eval_adj,
            range_basis,
            null_basis,
        };
        bank.validate_range_basis()?;
        Ok(bank)
    }

    /// Range-basis self check: the moment of a fixed coercive test spectrum
    /// must lie in the computed span.
    fn validate_range_basis(&self) -> Result<()> {
        let m = self.n_inputs();
        // Deterministic MA(2) factor with contraction coefficients.
        let shift = RMat::from_fn(m, m, |i, j| if (i + 1) % m == j { 1.0 } else { 0.0 });
        let diag = RMat::from_fn(m, m, |i, j| {
            if i == j {
                0.4 + 0.3 * (i as f64) / (m as f64)
            } else {
                0.0
            }
        });
        let n_pts = self.grid.n_points();
        let values: Vec<CMat> = (0..n_pts)
            .map(|k| {
                let z1 = Complex::from_polar(1.0, -self.grid.theta(k));
                let z2 = Complex::from_polar(1.0, -2.0 * self.grid.theta(k));
                let w = CMat::identity(m, m)
                    + complexify(&shift).scale(0.35) * z1
                    + complexify(&diag).scale(0.2) * z2;
                let p = &w * w.adjoint();
                (&p + p.adjoint()).scale(0.5)
            })
            .collect();
        let sigma = self.gamma_apply_values(&values);
        let (_, residual) = self.project_range_gamma(&sigma);
        if residual > 1e-9 * (1.0 + sigma.norm()) {
            return Err(Error::InvalidBank(format!(
                "range basis validation failed: residual {residual:.3e}"
            )));
        }
        Ok(())
    }

    pub fn a(&self) -> &RMat {
        &self.a
    }
    pub fn b(&self) -> &RMat {
        &self.b
    }
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }
    /// State dimension `n`.
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension `m`.
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    /// `G(e^{j theta_k})` samples.
    pub fn grid_eval(&self) -> &[CMat] {
        &self.grid_eval
    }
    pub fn range_basis(&self) -> &[RMat] {
        &self.range_basis
    }
    pub fn null_basis(&self) -> &[RMat] {
        &self.null_basis
    }
    /// Dimension of `Range Gamma`.
    pub fn range_dim(&self) -> usize {
        self.range_basis.len()
    }

    /// `G(e^{j theta_k})* Lambda G(e^{j theta_k})` for a real symmetric
    /// multiplier already lifted to the complex field.
    pub(crate) fn sandwich_complex(&self, lambda_c: &CMat, k: usize) -> CMat {
        &self.grid_eval_adj[k] * (lambda_c * &self.grid_eval[k])
    }

    /// `G* Lambda G` on the whole grid.
    pub fn sandwich_grid(&self, lambda: &RMat) -> Vec<CMat> {
        let lambda_c = complexify(lambda);
        (0..self.grid.n_points())
            .map(|k| self.sandwich_complex(&lambda_c, k))
            .collect()
    }

    /// The moment map `Gamma(Phi) = I(G Phi G*)`, returned as a real
    /// symmetric matrix.
    ///
    /// The imaginary part of the quadrature must be negligible (it vanishes
    /// identically for spectra of real processes); otherwise the input is
    /// rejected.
    pub fn gamma_apply(&self, phi: &MatrixGrid) -> Result<RMat> {
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "bank grid has {} points, spectrum {}",
                self.grid.n_points(),
                phi.n_points()
            )));
        }
        if phi.shape() != (self.n_inputs(), self.n_inputs()) {
            return Err(Error::DimensionMismatch(format!(
                "spectrum must be {0}x{0}",
                self.n_inputs()
            )));
        }
        let acc = self.gamma_accumulate(phi.values());
        let real = acc.map(|z| z.re);
        let imag_norm = acc.map(|z| z.im).norm();
        if imag_norm > 1e-10 * real.norm().max(1.0) {
            return Err(Error::ImaginaryResidual {
                residual: imag_norm,
            });
        }
        Ok((&real + real.transpose()).scale(0.5))
    }

    /// [`FilterBank::gamma_apply`] on raw samples, without the real-process
    /// check; used inside the solvers where the symmetry holds by
    /// construction.
    pub(crate) fn gamma_apply_values(&self, values: &[CMat]) -> RMat {
        let acc = self.gamma_accumulate(values);
        let real = acc.map(|z| z.re);
        (&real + real.transpose()).scale(0.5)
    }

    fn gamma_accumulate(&self, values: &[CMat]) -> CMat {
        let n = self.n_states();
        let mut acc = CMat::zeros(n, n);
        for (k, phi_k) in values.iter().enumerate() {
            let gp = &self.grid_eval[k] * phi_k;
            acc += gp * &self.grid_eval_adj[k];
        }
        acc.unscale(values.len() as f64)
    }

    /// Orthogonal projection of a symmetric matrix onto `Range Gamma`;
    /// returns the projection and the Frobenius norm of the residual.
    pub fn project_range_gamma(&self, sigma: &RMat) -> (RMat, f64) {
        let n = self.n_states();
        let mut proj = RMat::zeros(n, n);
        for e in &self.range_basis {
            let coeff = sigma.dot(e);
            proj += e * coeff;
        }
        let residual = (sigma - &proj).norm();
        (proj, residual)
    }

    /// Coordinates of a symmetric matrix in the range basis.
    pub fn range_coordinates(&self, sigma: &RMat) -> DVector<f64> {
        DVector::from_iterator(
            self.range_basis.len(),
            self.range_basis.iter().map(|e| sigma.dot(e)),
        )
    }

    /// Assembles a multiplier matrix from range-basis coordinates.
    pub fn assemble_from_coordinates(&self, coeffs: &DVector<f64>) -> RMat {
        let n = self.n_states();
        let mut lambda = RMat::zeros(n, n);
        for (c, e) in coeffs.iter().zip(self.range_basis.iter()) {
            lambda += e * *c;
        }
        lambda
    }
}

fn eval_bank(a: &RMat, b: &RMat, grid: &FrequencyGrid) -> Result<Vec<CMat>> {
    let n = a.nrows();
    let a_c = complexify(a);
    let b_c = complexify(b);
    let mut out = Vec::with_capacity(grid.n_points());
    for k in 0..grid.n_points() {
        let z = grid.point(k);
        let mut zi_a = -a_c.clone();
        for i in 0..n {
            zi_a[(i, i)] += z;
        }
        let x = zi_a.lu().solve(&b_c).ok_or(Error::IllConditioned {
            index: k,
            cond: f64::INFINITY,
        })?;
        out.push(x);
    }
    Ok(out)
}

/// Index layout of the orthonormal symmetric-matrix basis: diagonal cells
/// first ordering pairs `(i, j)` with `i <= j` row by row.
fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            pairs.push((i, j));
        }
    }
    pairs
}

fn vec_to_sym(v: &DVector<f64>, n: usize, pairs: &[(usize, usize)]) -> RMat {
    let mut s = RMat::zeros(n, n);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            s[(i, i)] = v[idx];
        } else {
            s[(i, j)] = v[idx] * inv_sqrt2;
            s[(j, i)] = v[idx] * inv_sqrt2;
        }
    }
    s
}

/// Splits the symmetric space into `Range Gamma` and its orthogonal
/// complement by an SVD of the sampled map `Lambda -> G* Lambda G`.
fn compute_range_split(
    grid_eval: &[CMat],
    n: usize,
    m: usize,
    n_points: usize,
) -> Result<(Vec<RMat>, Vec<RMat>)> {
    let pairs = sym_pairs(n);
    let s_dim = pairs.len();
    // Enough samples to pin down the rational kernel exactly: more than the
    // trigonometric degree of the entries of G* Lambda G, and enough rows
    // for a full right singular basis.
    let needed = (4 * n + 9).max(96).max(s_dim / (2 * m * m) + 8);
    let count = needed.min(n_points);
    let rows = count * 2 * m * m;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    let mut t = RMat::zeros(rows, s_dim);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        for (t_idx, sample) in (0..count).enumerate() {
            let k = sample * n_points / count;
            let g = &grid_eval[k];
            // G* E_ij G via outer products of the rows of G.
            let ri = g.row(i);
            let rj = g.row(j);
            let image: CMat = if i == j {
                ri.adjoint() * ri
            } else {
                (ri.adjoint() * rj + rj.adjoint() * ri).scale(inv_sqrt2)
            };
            let base = t_idx * 2 * m * m;
            let mut off = 0;
            for p in 0..m {
                for q in 0..m {
                    t[(base + off, c)] = image[(p, q)].re;
                    t[(base + off + 1, c)] = image[(p, q)].im;
                    off += 2;
                }
            }
        }
    }

    let svd = t.svd(false, true);
    let sigma = svd.singular_values;
    let v_t = svd.v_t.expect("requested right singular vectors");
    if v_t.nrows() < s_dim {
        return Err(Error::InvalidBank(
            "sampled moment map has too few rows for a full null-space basis".into(),
        ));
    }
    let sigma_max = sigma[0];
    if !(sigma_max > 0.0) {
        return Err(Error::InvalidBank("sampled moment map is identically zero".into()));
    }
    let cut = RANK_CUT * sigma_max;
    let retained = sigma.iter().filter(|&&x| x >= cut).count();
    if retained == 0 {
        return Err(Error::InvalidBank("moment map has empty range".into()));
    }
    if retained < s_dim {
        let gap = sigma[retained - 1] / sigma[retained].max(f64::MIN_POSITIVE);
        if gap < RANK_GAP {
            return Err(Error::RankAmbiguity { gap });
        }
    }
    let mut range = Vec::with_capacity(retained);
    let mut null = Vec::with_capacity(s_dim - retained);
    for r in 0..s_dim {
        let v = DVector::from_iterator(s_dim, v_t.row(r).iter().copied());
        let mat = vec_to_sym(&v, n, &pairs);
        if r < retained {
            range.push(mat);
        } else {
            null.push(mat);
        }
    }
    Ok((range, null))
}

/// The covariance-lag bank `G(z) = [z^{-l} I_m ... z^{-1} I_m]^T`: a block
/// shift `A` with `B` feeding the last block, so the bank state stacks the
/// `l` most recent inputs and the moment constraints become the first `l`
/// autocovariance lags.
pub fn make_covariance_lag_bank(m: usize, l: usize, grid: FrequencyGrid) -> Result<FilterBank> {
    if m < 1 || l < 2 {
        return Err(Error::InvalidBank(format!(
            "covariance-lag bank needs m >= 1, l >= 2; got m={m}, l={l}"
        )));
    }
    let n = l * m;
    let mut a = RMat::zeros(n, n);
    for blk in 0..l - 1 {
        for i in 0..m {
            a[(blk * m + i, (blk + 1) * m + i)] = 1.0;
        }
    }
    let mut b = RMat::zeros(n, m);
    for i in 0..m {
        b[((l - 1) * m + i, i)] = 1.0;
    }
    FilterBank::new(a, b, grid)
}

/// A feasible moment target: symmetric, positive definite and inside
/// `Range Gamma` up to the stated residual.
#[derive(Debug, Clone)]
pub struct CovarianceTarget {
    sigma: RMat,
    feasibility_residual: f64,
    min_eig: f64,
}

impl CovarianceTarget {
    /// Wraps a symmetric matrix, measuring its distance to `Range Gamma`
    /// and its smallest eigenvalue. Admissibility is *not* enforced here;
    /// the solvers check [`CovarianceTarget::is_admissible`].
    pub fn new(bank: &FilterBank, sigma: RMat) -> Result<Self> {
        let n = bank.n_states();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "target must be {n}x{n}, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let asym = (&sigma - sigma.transpose()).norm();
        if asym > 1e-10 * (1.0 + sigma.norm()) {
            return Err(Error::InfeasibleTarget(format!(
                "target not symmetric: residual {asym:.3e}"
            )));
        }
        let sigma = (&sigma + sigma.transpose()).scale(0.5);
        let (_, feasibility_residual) = bank.project_range_gamma(&sigma);
        let min_eig = sigma
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            sigma,
            feasibility_residual,
            min_eig,
        })
    }

    pub fn sigma(&self) -> &RMat {
        &self.sigma
    }
    pub fn feasibility_residual(&self) -> f64 {
        self.feasibility_residual
    }
    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    /// The solver admission test: positive definite and inside
    /// `Range Gamma`.
    pub fn is_admissible(&self) -> bool {
        self.min_eig > 0.0 && self.feasibility_residual <= 1e-8 * self.sigma.norm()
    }

    /// Admissibility as a hard error with a diagnostic.
    pub fn require_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(Error::InfeasibleTarget(format!(
                "min eigenvalue {:.3e}, range residual {:.3e} (norm {:.3e})",
                self.min_eig,
                self.feasibility_residual,
                self.sigma.norm()
            )))
        }
    }
}

/// Bank description for configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BankSpec {
    /// `G(z) = [z^{-l} I_m ... z^{-1} I_m]^T`.
    CovarianceLags { m: usize, l: usize },
    /// Arbitrary `(A, B)` pair, row-major.
    StateSpace { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl BankSpec {
    pub fn build(&self, grid: FrequencyGrid) -> Result<FilterBank> {
        match self {
            BankSpec::CovarianceLags { m, l } => make_covariance_lag_bank(*m, *l, grid),
            BankSpec::StateSpace { a, b } => {
                let a = rows_to_matrix(a, "a")?;
                let b = rows_to_matrix(b, "b")?;
                FilterBank::new(a, b, grid)
            }
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<RMat> {
    if rows.is_empty() {
        return Err(Error::Config(format!("matrix '{what}' is empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("ragged rows in matrix '{what}'")));
    }
    Ok(RMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
