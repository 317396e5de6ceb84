//! C ABI for the spectral-transport library.
//!
//! The interface follows the usual opaque-handle pattern: grids are created
//! through constructors returning `StStatus`, used behind pointers and
//! released with the matching `_free` function. Estimations and Monte Carlo
//! studies are driven by the same JSON configs as the command-line tool and
//! return JSON documents. Every entry point catches panics; on any failure
//! a thread-local message is available via [`st_last_error_message`].
//!
//! The C header is generated into `include/spectral_transport.h` at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use spectral_transport::error::Error;
use spectral_transport::run::{run_estimate, run_simulate, EstimateConfig, SimulateConfig};
use spectral_transport::transport::{hellinger_distance, transport_distance};
use spectral_transport::{run_study, ExperimentConfig, GridKind, MatrixGrid};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    StOk = 0,
    /// A required pointer argument was null.
    StNullPointer = 1,
    /// Arguments failed validation (dimensions, ranges, encodings).
    StInvalidArgument = 2,
    /// JSON or CSV parsing failed.
    StParse = 3,
    /// File system access failed.
    StIo = 4,
    /// The computation itself rejected the inputs or failed to converge.
    StDomain = 5,
    /// A panic was caught at the boundary.
    StPanic = 6,
}

/// Matrix-grid semantics, mirroring the library's grid kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StGridKind {
    StTransfer = 0,
    StPsd = 1,
    StWeight = 2,
}

impl From<StGridKind> for GridKind {
    fn from(kind: StGridKind) -> Self {
        match kind {
            StGridKind::StTransfer => GridKind::Transfer,
            StGridKind::StPsd => GridKind::Psd,
            StGridKind::StWeight => GridKind::Weight,
        }
    }
}

/// Distance breakdown returned by the metric entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StDistanceReport {
    pub d: f64,
    pub d_squared: f64,
    pub term_x: f64,
    pub term_y: f64,
    pub term_cross: f64,
    pub n_points: usize,
}

/// Opaque handle to a sampled matrix function on the unit circle.
pub struct StMatrixGrid {
    inner: MatrixGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> StStatus {
    match error {
        Error::Io(_) => StStatus::StIo,
        Error::Json(_) | Error::Csv(_) => StStatus::StParse,
        Error::Config(_) | Error::DimensionMismatch(_) | Error::GridMismatch(_) => {
            StStatus::StInvalidArgument
        }
        _ => StStatus::StDomain,
    }
}

fn fail(error: Error) -> StStatus {
    let status = status_of(&error);
    set_error(&error.to_string());
    status
}

fn guarded(body: impl FnOnce() -> StStatus) -> StStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in spectral-transport".to_string());
            set_error(&message);
            StStatus::StPanic
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn read_c_str<'a>(ptr: *const c_char) -> Result<&'a str, StStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(StStatus::StNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        StStatus::StInvalidArgument
    })
}

fn return_string(text: String, out: *mut *mut c_char) -> StStatus {
    match CString::new(text) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            StStatus::StOk
        }
        Err(_) => {
            set_error("output contains interior NUL bytes");
            StStatus::StInvalidArgument
        }
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `ptr` must be null or a pointer previously returned by one of the
/// `*_json`/`*_csv` entry points, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}

/// Builds a grid from interleaved samples: for each frequency a row-major
/// `m x m` block of `(re, im)` pairs, `n_points * m * m * 2` doubles total.
///
/// # Safety
/// `values` must point to `n_points * m * m * 2` readable doubles and `out`
/// must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_new(
    n_points: usize,
    m: usize,
    kind: StGridKind,
    real_process: bool,
    values: *const f64,
    out: *mut *mut StMatrixGrid,
) -> StStatus {
    guarded(|| {
        if out.is_null() || values.is_null() {
            set_error("null pointer argument");
            return StStatus::StNullPointer;
        }
        if m == 0 {
            set_error("dimension must be positive");
            return StStatus::StInvalidArgument;
        }
        let grid = match spectral_transport::FrequencyGrid::new(n_points) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let flat = std::slice::from_raw_parts(values, n_points * m * m * 2);
        let mats: Vec<_> = (0..n_points)
            .map(|k| {
                nalgebra::DMatrix::from_fn(m, m, |i, j| {
                    let base = (k * m * m + i * m + j) * 2;
                    nalgebra::Complex::new(flat[base], flat[base + 1])
                })
            })
            .collect();
        match MatrixGrid::new(grid, mats, kind.into(), real_process) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(StMatrixGrid { inner }));
                StStatus::StOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a grid from MatrixGrid JSON text.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_from_json(
    json: *const c_char,
    out: *mut *mut StMatrixGrid,
) -> StStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return StStatus::StNullPointer;
        }
        let text = match read_c_str(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match MatrixGrid::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(StMatrixGrid { inner }));
                StStatus::StOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Reads a grid from a MatrixGrid JSON file.
///
/// # Safety
/// As [`st_matrix_grid_from_json`], with `path` a file-system path.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_read_json(
    path: *const c_char,
    out: *mut *mut StMatrixGrid,
) -> StStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return StStatus::StNullPointer;
        }
        let path = match read_c_str(path) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match MatrixGrid::read_json_file(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(StMatrixGrid { inner }));
                StStatus::StOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Serializes a grid to JSON; free the result with [`st_string_free`].
///
/// # Safety
/// `grid` must be a live grid handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_to_json(
    grid: *const StMatrixGrid,
    out: *mut *mut c_char,
) -> StStatus {
    guarded(|| {
        if grid.is_null() || out.is_null() {
            set_error("null pointer argument");
            return StStatus::StNullPointer;
        }
        match (*grid).inner.to_json() {
            Ok(text) => return_string(text, out),
            Err(e) => fail(e),
        }
    })
}

/// Number of frequency samples in the grid; zero for a null handle.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_n_points(grid: *const StMatrixGrid) -> usize {
    if grid.is_null() {
        return 0;
    }
    (*grid).inner.n_points()
}

/// Matrix dimension of the (square) samples; zero for a null handle.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_dim(grid: *const StMatrixGrid) -> usize {
    if grid.is_null() {
        return 0;
    }
    (*grid).inner.dim()
}

/// Releases a grid handle.
///
/// # Safety
/// `grid` must be null or a handle returned by a constructor, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn st_matrix_grid_free(grid: *mut StMatrixGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

unsafe fn distance_impl(
    phi_x: *const StMatrixGrid,
    phi_y: *const StMatrixGrid,
    omega: *const StMatrixGrid,
    out: *mut StDistanceReport,
) -> StStatus {
    if phi_x.is_null() || phi_y.is_null() || out.is_null() {
        set_error("null pointer argument");
        return StStatus::StNullPointer;
    }
    let report = if omega.is_null() {
        hellinger_distance(&(*phi_x).inner, &(*phi_y).inner)
    } else {
        transport_distance(&(*phi_x).inner, &(*phi_y).inner, &(*omega).inner)
    };
    match report {
        Ok(r) => {
            *out = StDistanceReport {
                d: r.d,
                d_squared: r.d_squared,
                term_x: r.term_x,
                term_y: r.term_y,
                term_cross: r.term_cross,
                n_points: r.n_points,
            };
            StStatus::StOk
        }
        Err(e) => fail(e),
    }
}

/// Weighted transportation distance between two psd grids; pass a null
/// `omega` for the identity weight (the Hellinger distance).
///
/// # Safety
/// All non-null handles must be live; `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn st_transport_distance(
    phi_x: *const StMatrixGrid,
    phi_y: *const StMatrixGrid,
    omega: *const StMatrixGrid,
    out: *mut StDistanceReport,
) -> StStatus {
    guarded(|| distance_impl(phi_x, phi_y, omega, out))
}

/// Hellinger distance (identity weight).
///
/// # Safety
/// As [`st_transport_distance`].
#[no_mangle]
pub unsafe extern "C" fn st_hellinger_distance(
    phi_x: *const StMatrixGrid,
    phi_y: *const StMatrixGrid,
    out: *mut StDistanceReport,
) -> StStatus {
    guarded(|| distance_impl(phi_x, phi_y, std::ptr::null(), out))
}

/// Squared transport distance between constant Gaussian covariances;
/// matrices are row-major `m x m` doubles, `weight` may be null for the
/// identity (Bures-Wasserstein case).
///
/// # Safety
/// `sigma_x`/`sigma_y` (and `weight` when non-null) must point to `m * m`
/// readable doubles; `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn st_static_gaussian_w2(
    m: usize,
    sigma_x: *const f64,
    sigma_y: *const f64,
    weight: *const f64,
    out: *mut f64,
) -> StStatus {
    guarded(|| {
        if sigma_x.is_null() || sigma_y.is_null() || out.is_null() {
            set_error("null pointer argument");
            return StStatus::StNullPointer;
        }
        if m == 0 {
            set_error("dimension must be positive");
            return StStatus::StInvalidArgument;
        }
        let read = |ptr: *const f64| {
            let flat = std::slice::from_raw_parts(ptr, m * m);
            nalgebra::DMatrix::from_fn(m, m, |i, j| flat[i * m + j])
        };
        let sx = read(sigma_x);
        let sy = read(sigma_y);
        let w = if weight.is_null() {
            nalgebra::DMatrix::identity(m, m)
        } else {
            read(weight)
        };
        match spectral_transport::static_gaussian_w2(&sx, &sy, &w) {
            Ok(value) => {
                *out = value;
                StStatus::StOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs one estimation from an `EstimateConfig` JSON document and returns
/// the result (including diagnostics and the reconstructed spectra) as
/// JSON. A non-converged solve still returns `StOk`; inspect the
/// `converged` field. Free the result with [`st_string_free`].
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out_json` a
/// valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn st_estimate_json(
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> StStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return StStatus::StNullPointer;
        }
        let text = match read_c_str(config_json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let config: EstimateConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("malformed estimate config: {e}"));
                return StStatus::StParse;
            }
        };
        match run_estimate(&config).and_then(|r| Ok(serde_json::to_string(&r)?)) {
            Ok(json) => return_string(json, out_json),
            Err(e) => fail(e),
        }
    })
}

/// Runs a Monte Carlo study from an `ExperimentConfig` JSON document and
/// returns the report as JSON. Free the result with [`st_string_free`].
///
/// # Safety
/// As [`st_estimate_json`].
#[no_mangle]
pub unsafe extern "C" fn st_run_study_json(
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> StStatus {
    guarded(|| {
        if out_json.is_null() {
            set_error("null output pointer");
            return StStatus::StNullPointer;
        }
        let text = match read_c_str(config_json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let config: ExperimentConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("malformed study config: {e}"));
                return StStatus::StParse;
            }
        };
        match run_study(&config).and_then(|r| Ok(serde_json::to_string(&r)?)) {
            Ok(json) => return_string(json, out_json),
            Err(e) => fail(e),
        }
    })
}

/// Simulates a measurement record from a `SimulateConfig` JSON document and
/// returns it as CSV text. Free the result with [`st_string_free`].
///
/// # Safety
/// As [`st_estimate_json`].
#[no_mangle]
pub unsafe extern "C" fn st_simulate_csv(
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> StStatus {
    guarded(|| {
        if out_csv.is_null() {
            set_error("null output pointer");
            return StStatus::StNullPointer;
        }
        let text = match read_c_str(config_json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let config: SimulateConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("malformed simulate config: {e}"));
                return StStatus::StParse;
            }
        };
        let record = match run_simulate(&config) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let mut buf = Vec::new();
        if let Err(e) = record.to_csv_writer(&mut buf) {
            return fail(e);
        }
        match String::from_utf8(buf) {
            Ok(csv) => return_string(csv, out_csv),
            Err(_) => {
                set_error("csv output is not valid UTF-8");
                StStatus::StInvalidArgument
            }
        }
    })
}
