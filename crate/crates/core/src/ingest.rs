//! From finite data records to feasible covariance targets.
//!
//! Feasibility of the spectrum approximation problems demands a target that
//! is positive definite *and* inside `Range Gamma`. Rather than projecting a
//! raw sample covariance back onto that set, the pipeline builds a strictly
//! positive preliminary spectrum from the data (a Bartlett-tapered
//! correlogram plus a small ridge) and takes its exact moment
//! `Sigma = Gamma(Phi_prelim)`: membership and positivity then hold by
//! construction.

use nalgebra::DVector;
use num_complex::Complex;

use crate::bank::{CovarianceTarget, FilterBank};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{complexify, CMat, RMat};
use crate::matrix_grid::{GridKind, MatrixGrid};

/// A finite record of `m`-dimensional observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    samples: Vec<DVector<f64>>,
    m: usize,
}

impl DataRecord {
    /// Requires at least `10 * m` finite samples.
    pub fn new(samples: Vec<DVector<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::DataTooShort("empty record".into()));
        }
        let m = samples[0].len();
        if m == 0 {
            return Err(Error::DataTooShort("zero-dimensional samples".into()));
        }
        if samples.len() < 10 * m {
            return Err(Error::DataTooShort(format!(
                "need at least {} samples for m={m}, got {}",
                10 * m,
                samples.len()
            )));
        }
        for (t, s) in samples.iter().enumerate() {
            if s.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "sample {t} has {} entries, expected {m}",
                    s.len()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::DataTooShort(format!("non-finite entry at sample {t}")));
            }
        }
        Ok(Self { samples, m })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }
    pub fn dim(&self) -> usize {
        self.m
    }
    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    /// Reads a CSV record: one row per time index, `m` columns. A first row
    /// that does not parse as numbers is treated as a header and skipped.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for (idx, row) in rdr.records().enumerate() {
            let row = row?;
            let parsed: std::result::Result<Vec<f64>, _> =
                row.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(vals) => samples.push(DVector::from_vec(vals)),
                Err(_) if idx == 0 => continue, // header row
                Err(e) => {
                    return Err(Error::Config(format!(
                        "csv row {idx}: non-numeric field ({e})"
                    )))
                }
            }
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes the record with a `y1..ym` header row.
    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.m).map(|i| format!("y{i}")).collect();
        wtr.write_record(&header)?;
        for s in &self.samples {
            let row: Vec<String> = s.iter().map(|x| format!("{x}")).collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: &std::path::Path) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }

    /// Biased lag-`k` sample covariance `(1/N) sum_t y_{t+k} y_t^T`.
    pub fn lag_covariance(&self, k: usize) -> RMat {
        let n = self.samples.len();
        let mut acc = RMat::zeros(self.m, self.m);
        if k >= n {
            return acc;
        }
        for t in 0..n - k {
            acc += &self.samples[t + k] * self.samples[t].transpose();
        }
        acc.unscale(n as f64)
    }
}

/// Burn-in length for the state recursion: the nilpotent transient of the
/// covariance-lag bank plus a safety margin for general stable banks.
fn state_burn_in(bank: &FilterBank) -> usize {
    bank.n_states().div_ceil(bank.n_inputs()) + 50
}

/// Empirical steady-state covariance of the bank state driven by the
/// record: runs `x_{t+1} = A x_t + B y_t` from zero, discards the burn-in
/// prefix and averages `x x^T` over the remainder.
pub fn sample_state_covariance(data: &DataRecord, bank: &FilterBank) -> Result<RMat> {
    if data.dim() != bank.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "record has dimension {}, bank expects {}",
            data.dim(),
            bank.n_inputs()
        )));
    }
    let n = bank.n_states();
    let burn = state_burn_in(bank);
    let usable = data.n_samples().saturating_sub(burn);
    if usable < 10 * n {
        return Err(Error::DataTooShort(format!(
            "need at least {} post-burn-in states (burn-in {burn}), got {usable}",
            10 * n
        )));
    }
    let mut x = DVector::<f64>::zeros(n);
    let mut acc = RMat::zeros(n, n);
    let mut count = 0usize;
    for (t, y) in data.samples().iter().enumerate() {
        x = bank.a() * &x + bank.b() * y;
        if t >= burn {
            acc += &x * x.transpose();
            count += 1;
        }
    }
    let acc = acc.unscale(count as f64);
    Ok((&acc + acc.transpose()).scale(0.5))
}

/// Options for [`feasible_sigma`].
#[derive(Debug, Clone)]
pub struct FeasibleSigmaOptions {
    /// Number of lags used by the correlogram; defaults to twice the number
    /// of lags the bank can resolve (`2 * ceil(n/m)`).
    pub l_est: Option<usize>,
    /// Ridge floor added to the preliminary spectrum.
    pub reg_floor: f64,
}

impl Default for FeasibleSigmaOptions {
    fn default() -> Self {
        Self {
            l_est: None,
            reg_floor: 1e-6,
        }
    }
}

/// Bartlett-tapered correlogram spectrum, regularized to be coercive:
/// `Phi(theta) = C_0 + sum_k w_k (C_k e^{-jk theta} + C_k^T e^{jk theta}) + eps I`
/// with `w_k = 1 - k/(l_est + 1)` and
/// `eps = max(reg_floor, -1.1 * min eigenvalue over the grid)`.
pub fn preliminary_spectrum(
    data: &DataRecord,
    l_est: usize,
    grid: &FrequencyGrid,
    reg_floor: f64,
) -> Result<MatrixGrid> {
    if l_est + 1 >= data.n_samples() {
        return Err(Error::DataTooShort(format!(
            "cannot estimate {l_est} lags from {} samples",
            data.n_samples()
        )));
    }
    let m = data.dim();
    let lags: Vec<RMat> = (0..=l_est).map(|k| data.lag_covariance(k)).collect();
    let mut values: Vec<CMat> = Vec::with_capacity(grid.n_points());
    for idx in 0..grid.n_points() {
        let theta = grid.theta(idx);
        let mut v = complexify(&lags[0]);
        for (k, lag) in lags.iter().enumerate().skip(1) {
            let taper = 1.0 - k as f64 / (l_est as f64 + 1.0);
            let z = Complex::from_polar(taper, -(k as f64) * theta);
            let c = complexify(lag);
            v += &c * z + c.transpose() * z.conj();
        }
        values.push((&v + v.adjoint()).scale(0.5));
    }
    let min_eig = values
        .iter()
        .map(crate::linalg::hermitian_min_eig)
        .fold(f64::INFINITY, f64::min);
    let ridge = reg_floor.max(-1.1 * min_eig);
    for v in &mut values {
        for i in 0..m {
            v[(i, i)] += Complex::new(ridge, 0.0);
        }
    }
    MatrixGrid::new(grid.clone(), values, GridKind::Psd, true)
}

/// Feasible covariance target from a data record: the exact bank moment of
/// the preliminary spectrum. Positive definiteness and `Range Gamma`
/// membership hold by construction and are re-verified on the result.
pub fn feasible_sigma(
    data: &DataRecord,
    bank: &FilterBank,
    opts: &FeasibleSigmaOptions,
) -> Result<CovarianceTarget> {
    if data.dim() != bank.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "record has dimension {}, bank expects {}",
            data.dim(),
            bank.n_inputs()
        )));
    }
    let l_est = opts
        .l_est
        .unwrap_or_else(|| 2 * bank.n_states().div_ceil(bank.n_inputs()));
    let phi = preliminary_spectrum(data, l_est, bank.grid(), opts.reg_floor)?;
    let sigma = bank.gamma_apply(&phi)?;
    let target = CovarianceTarget::new(bank, sigma)?;
    if target.min_eig() <= 0.0 {
        return Err(Error::InfeasibleTarget(format!(
            "moment of the preliminary spectrum is not positive definite (min eig {:.3e})",
            target.min_eig()
        )));
    }
    Ok(target)
}
