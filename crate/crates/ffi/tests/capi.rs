//! Exercises the C entry points from Rust, including error paths and the
//! generated header.

use std::ffi::{CStr, CString};
use std::ptr;

use spectral_transport_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(st_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

/// Identity psd grid serialized through the wire format.
fn identity_grid_values(n_points: usize, m: usize) -> Vec<f64> {
    let mut flat = vec![0.0; n_points * m * m * 2];
    for k in 0..n_points {
        for i in 0..m {
            let base = (k * m * m + i * m + i) * 2;
            flat[base] = 1.0;
        }
    }
    flat
}

#[test]
fn version_is_exposed() {
    let v = unsafe { CStr::from_ptr(st_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn grid_lifecycle_and_distance() {
    let n = 16;
    let ident = identity_grid_values(n, 2);
    let mut scaled = identity_grid_values(n, 2);
    for v in scaled.iter_mut() {
        *v *= 4.0;
    }

    let mut phi_x: *mut StMatrixGrid = ptr::null_mut();
    let mut phi_y: *mut StMatrixGrid = ptr::null_mut();
    unsafe {
        assert_eq!(
            st_matrix_grid_new(n, 2, StGridKind::StPsd, true, scaled.as_ptr(), &mut phi_x),
            StStatus::StOk
        );
        assert_eq!(
            st_matrix_grid_new(n, 2, StGridKind::StPsd, true, ident.as_ptr(), &mut phi_y),
            StStatus::StOk
        );
        assert_eq!(st_matrix_grid_n_points(phi_x), n);
        assert_eq!(st_matrix_grid_dim(phi_x), 2);

        let mut report = StDistanceReport {
            d: -1.0,
            d_squared: -1.0,
            term_x: 0.0,
            term_y: 0.0,
            term_cross: 0.0,
            n_points: 0,
        };
        assert_eq!(
            st_transport_distance(phi_x, phi_y, ptr::null(), &mut report),
            StStatus::StOk
        );
        // Scalar-per-channel case: d^2 = 2 * (2 - 1)^2.
        assert!((report.d_squared - 2.0).abs() < 1e-12);
        assert_eq!(report.n_points, n);

        let mut hellinger = report;
        assert_eq!(
            st_hellinger_distance(phi_x, phi_y, &mut hellinger),
            StStatus::StOk
        );
        assert_eq!(hellinger.d_squared, report.d_squared);

        st_matrix_grid_free(phi_x);
        st_matrix_grid_free(phi_y);
    }
}

#[test]
fn json_round_trip_through_the_boundary() {
    let n = 8;
    let ident = identity_grid_values(n, 1);
    let mut grid: *mut StMatrixGrid = ptr::null_mut();
    unsafe {
        assert_eq!(
            st_matrix_grid_new(n, 1, StGridKind::StPsd, true, ident.as_ptr(), &mut grid),
            StStatus::StOk
        );
        let mut json: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(st_matrix_grid_to_json(grid, &mut json), StStatus::StOk);
        let text = CStr::from_ptr(json).to_str().unwrap().to_string();
        assert!(text.contains("\"n_points\":8"));

        let mut back: *mut StMatrixGrid = ptr::null_mut();
        let c_text = CString::new(text).unwrap();
        assert_eq!(
            st_matrix_grid_from_json(c_text.as_ptr(), &mut back),
            StStatus::StOk
        );
        assert_eq!(st_matrix_grid_n_points(back), n);

        st_string_free(json);
        st_matrix_grid_free(grid);
        st_matrix_grid_free(back);
    }
}

#[test]
fn null_pointers_are_rejected_with_message() {
    unsafe {
        let mut out: *mut StMatrixGrid = ptr::null_mut();
        assert_eq!(
            st_matrix_grid_from_json(ptr::null(), &mut out),
            StStatus::StNullPointer
        );
        assert!(!last_error().is_empty());

        let mut report = StDistanceReport {
            d: 0.0,
            d_squared: 0.0,
            term_x: 0.0,
            term_y: 0.0,
            term_cross: 0.0,
            n_points: 0,
        };
        assert_eq!(
            st_transport_distance(ptr::null(), ptr::null(), ptr::null(), &mut report),
            StStatus::StNullPointer
        );
    }
}

#[test]
fn invalid_grid_is_domain_error() {
    // Indefinite sample rejected for a psd grid.
    let n = 8;
    let mut values = identity_grid_values(n, 1);
    values[0] = -1.0;
    let mut out: *mut StMatrixGrid = ptr::null_mut();
    let status = unsafe {
        st_matrix_grid_new(n, 1, StGridKind::StPsd, false, values.as_ptr(), &mut out)
    };
    assert_eq!(status, StStatus::StDomain);
    assert!(last_error().contains("coercive"), "{}", last_error());
}

#[test]
fn static_w2_matches_closed_form() {
    let sx = [4.0, 0.0, 0.0, 4.0];
    let sy = [1.0, 0.0, 0.0, 1.0];
    let mut out = 0.0f64;
    let status =
        unsafe { st_static_gaussian_w2(2, sx.as_ptr(), sy.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(status, StStatus::StOk);
    assert!((out - 2.0).abs() < 1e-12);
}

#[test]
fn estimate_json_end_to_end() {
    let config = CString::new(
        r#"{
            "method": "is",
            "grid_points": 128,
            "bank": {"type": "covariance_lags", "m": 1, "l": 2},
            "sigma": {"source": "prior"},
            "prior": {"type": "filter",
                      "a": [[0.5]], "b": [[1.0]], "c": [[0.5]], "d": [[1.0]]}
        }"#,
    )
    .unwrap();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { st_estimate_json(config.as_ptr(), &mut out) };
    assert_eq!(status, StStatus::StOk, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(parsed["method"], "is");
    assert!(parsed["converged"].as_bool().unwrap());
    unsafe { st_string_free(out) };
}

#[test]
fn estimate_json_rejects_malformed_config() {
    let config = CString::new(r#"{"method": "is"}"#).unwrap();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { st_estimate_json(config.as_ptr(), &mut out) };
    assert_eq!(status, StStatus::StParse);
    assert!(last_error().contains("bank"), "{}", last_error());
}

#[test]
fn study_json_end_to_end() {
    let config = CString::new(
        r#"{"n_experiments": 1, "state_order": 2, "l": 3, "grid_points": 128,
            "n_samples": 80, "rng_seed": 5}"#,
    )
    .unwrap();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { st_run_study_json(config.as_ptr(), &mut out) };
    assert_eq!(status, StStatus::StOk, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
    assert!(parsed["aggregate"]["mean_l2_transport"].as_f64().is_some());
    unsafe { st_string_free(out) };
}

#[test]
fn simulate_csv_end_to_end() {
    let config = CString::new(
        r#"{"w": {"a": [[0.5]], "b": [[1.0]], "c": [[0.5]], "d": [[1.0]]},
            "n_samples": 30, "seed": 1}"#,
    )
    .unwrap();
    let mut out: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { st_simulate_csv(config.as_ptr(), &mut out) };
    assert_eq!(status, StStatus::StOk, "{}", last_error());
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap();
    assert_eq!(text.lines().count(), 31);
    unsafe { st_string_free(out) };
}

#[test]
fn header_is_generated() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("spectral_transport.h");
    let text = std::fs::read_to_string(&header).expect("header generated at build time");
    assert!(text.contains("SPECTRAL_TRANSPORT_H"));
    assert!(text.contains("st_transport_distance"));
    assert!(text.contains("typedef struct StMatrixGrid StMatrixGrid;"));
    assert!(text.contains("st_last_error_message"));
}
