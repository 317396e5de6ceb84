#ifndef SPECTRAL_TRANSPORT_H
#define SPECTRAL_TRANSPORT_H

/* Generated by cbindgen from spectral-transport-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum StStatus {
  StOk = 0,
  /**
   * A required pointer argument was null.
   */
  StNullPointer = 1,
  /**
   * Arguments failed validation (dimensions, ranges, encodings).
   */
  StInvalidArgument = 2,
  /**
   * JSON or CSV parsing failed.
   */
  StParse = 3,
  /**
   * File system access failed.
   */
  StIo = 4,
  /**
   * The computation itself rejected the inputs or failed to converge.
   */
  StDomain = 5,
  /**
   * A panic was caught at the boundary.
   */
  StPanic = 6,
} StStatus;

/**
 * Matrix-grid semantics, mirroring the library's grid kinds.
 */
typedef enum StGridKind {
  StTransfer = 0,
  StPsd = 1,
  StWeight = 2,
} StGridKind;

/**
 * Opaque handle to a sampled matrix function on the unit circle.
 */
typedef struct StMatrixGrid StMatrixGrid;

/**
 * Distance breakdown returned by the metric entry points.
 */
typedef struct StDistanceReport {
  double d;
  double d_squared;
  double term_x;
  double term_y;
  double term_cross;
  size_t n_points;
} StDistanceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *st_version(void);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *st_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `ptr` must be null or a pointer previously returned by one of the
 * `*_json`/`*_csv` entry points, not yet freed.
 */
void st_string_free(char *ptr);

/**
 * Builds a grid from interleaved samples: for each frequency a row-major
 * `m x m` block of `(re, im)` pairs, `n_points * m * m * 2` doubles total.
 *
 * # Safety
 * `values` must point to `n_points * m * m * 2` readable doubles and `out`
 * must be a valid destination pointer.
 */
enum StStatus st_matrix_grid_new(size_t n_points,
                                 size_t m,
                                 enum StGridKind kind,
                                 bool real_process,
                                 const double *values,
                                 struct StMatrixGrid **out);

/**
 * Parses a grid from MatrixGrid JSON text.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid
 * destination pointer.
 */
enum StStatus st_matrix_grid_from_json(const char *json, struct StMatrixGrid **out);

/**
 * Reads a grid from a MatrixGrid JSON file.
 *
 * # Safety
 * As [`st_matrix_grid_from_json`], with `path` a file-system path.
 */
enum StStatus st_matrix_grid_read_json(const char *path, struct StMatrixGrid **out);

/**
 * Serializes a grid to JSON; free the result with [`st_string_free`].
 *
 * # Safety
 * `grid` must be a live grid handle and `out` a valid destination.
 */
enum StStatus st_matrix_grid_to_json(const struct StMatrixGrid *grid, char **out);

/**
 * Number of frequency samples in the grid; zero for a null handle.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
size_t st_matrix_grid_n_points(const struct StMatrixGrid *grid);

/**
 * Matrix dimension of the (square) samples; zero for a null handle.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
size_t st_matrix_grid_dim(const struct StMatrixGrid *grid);

/**
 * Releases a grid handle.
 *
 * # Safety
 * `grid` must be null or a handle returned by a constructor, not yet
 * freed.
 */
void st_matrix_grid_free(struct StMatrixGrid *grid);

/**
 * Weighted transportation distance between two psd grids; pass a null
 * `omega` for the identity weight (the Hellinger distance).
 *
 * # Safety
 * All non-null handles must be live; `out` must be a valid destination.
 */
enum StStatus st_transport_distance(const struct StMatrixGrid *phi_x,
                                    const struct StMatrixGrid *phi_y,
                                    const struct StMatrixGrid *omega,
                                    struct StDistanceReport *out);

/**
 * Hellinger distance (identity weight).
 *
 * # Safety
 * As [`st_transport_distance`].
 */
enum StStatus st_hellinger_distance(const struct StMatrixGrid *phi_x,
                                    const struct StMatrixGrid *phi_y,
                                    struct StDistanceReport *out);

/**
 * Squared transport distance between constant Gaussian covariances;
 * matrices are row-major `m x m` doubles, `weight` may be null for the
 * identity (Bures-Wasserstein case).
 *
 * # Safety
 * `sigma_x`/`sigma_y` (and `weight` when non-null) must point to `m * m`
 * readable doubles; `out` must be a valid destination.
 */
enum StStatus st_static_gaussian_w2(size_t m,
                                    const double *sigma_x,
                                    const double *sigma_y,
                                    const double *weight,
                                    double *out);

/**
 * Runs one estimation from an `EstimateConfig` JSON document and returns
 * the result (including diagnostics and the reconstructed spectra) as
 * JSON. A non-converged solve still returns `StOk`; inspect the
 * `converged` field. Free the result with [`st_string_free`].
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated string and `out_json` a
 * valid destination pointer.
 */
enum StStatus st_estimate_json(const char *config_json, char **out_json);

/**
 * Runs a Monte Carlo study from an `ExperimentConfig` JSON document and
 * returns the report as JSON. Free the result with [`st_string_free`].
 *
 * # Safety
 * As [`st_estimate_json`].
 */
enum StStatus st_run_study_json(const char *config_json, char **out_json);

/**
 * Simulates a measurement record from a `SimulateConfig` JSON document and
 * returns it as CSV text. Free the result with [`st_string_free`].
 *
 * # Safety
 * As [`st_estimate_json`].
 */
enum StStatus st_simulate_csv(const char *config_json, char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRAL_TRANSPORT_H */
