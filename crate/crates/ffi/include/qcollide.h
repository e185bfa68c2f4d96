#ifndef QCOLLIDE_H
#define QCOLLIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum QcStatus {
  QC_STATUS_OK = 0,
  QC_STATUS_NULL_POINTER = 1,
  QC_STATUS_INVALID_ARGUMENT = 2,
  QC_STATUS_CONFIG = 3,
  QC_STATUS_RUNTIME = 4,
  QC_STATUS_BUFFER_TOO_SMALL = 5,
  QC_STATUS_PANIC = 6,
} QcStatus;

/**
 * Parsed and validated experiment configuration.
 */
typedef struct QcExperiment QcExperiment;

/**
 * Completed convergence scan.
 */
typedef struct QcScanResult QcScanResult;

/**
 * One row of a convergence scan.
 */
typedef struct QcConvergenceRow {
  uint64_t k;
  uint64_t n_collisions;
  double d;
  double max_elem_dev;
  uint64_t wall_ms;
} QcConvergenceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null. The
 * pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *qc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qc_version(void);

/**
 * Parses a JSON experiment config.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum QcStatus qc_experiment_from_json(const char *json, struct QcExperiment **out);

/**
 * # Safety
 * `exp` must be null or a handle from [`qc_experiment_from_json`] that has
 * not been freed.
 */
void qc_experiment_free(struct QcExperiment *exp);

/**
 * Overrides the master seed.
 *
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum QcStatus qc_experiment_set_seed(struct QcExperiment *exp, uint64_t seed);

/**
 * Number of system qubits.
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` a valid pointer.
 */
enum QcStatus qc_experiment_n_qubits(const struct QcExperiment *exp, uint32_t *out);

/**
 * Runs the convergence scan. `threads == 0` uses one worker per core.
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` a valid pointer.
 */
enum QcStatus qc_experiment_scan(const struct QcExperiment *exp,
                                 uint32_t threads,
                                 struct QcScanResult **out);

/**
 * Runs the experiment and writes CSV, matrix dumps and manifest into
 * `out_dir` (or the config's directory when null).
 *
 * # Safety
 * `exp` must be a live experiment handle; `out_dir` null or NUL-terminated.
 */
enum QcStatus qc_experiment_run(const struct QcExperiment *exp,
                                const char *out_dir,
                                uint32_t threads);

/**
 * Ensemble average `Θ_n(K)` over `k` trajectories on streams `0..k`.
 * Buffers must hold `4^n_qubits` doubles each.
 *
 * # Safety
 * `exp` must be a live experiment handle; `re` and `im` must point to `len`
 * writable doubles.
 */
enum QcStatus qc_experiment_ensemble_density(const struct QcExperiment *exp,
                                             uint64_t k,
                                             uint32_t threads,
                                             double *re,
                                             double *im,
                                             size_t len);

/**
 * Exact density matrix `ρ_n` after the configured number of collisions.
 *
 * # Safety
 * As [`qc_experiment_ensemble_density`].
 */
enum QcStatus qc_experiment_exact_density(const struct QcExperiment *exp,
                                          double *re,
                                          double *im,
                                          size_t len);

/**
 * # Safety
 * `res` must be null or a handle from [`qc_experiment_scan`] that has not
 * been freed.
 */
void qc_scan_result_free(struct QcScanResult *res);

/**
 * Number of rows in the scan; 0 for a null handle.
 *
 * # Safety
 * `res` must be null or a live scan handle.
 */
size_t qc_scan_result_len(const struct QcScanResult *res);

/**
 * # Safety
 * `res` must be a live scan handle; `out` a valid pointer.
 */
enum QcStatus qc_scan_result_row(const struct QcScanResult *res,
                                 size_t index,
                                 struct QcConvergenceRow *out);

/**
 * Fitted log-log slope of D against K. Fails with `InvalidArgument` when
 * the scan has fewer than three rows with positive D.
 *
 * # Safety
 * `res` must be a live scan handle; `out` a valid pointer.
 */
enum QcStatus qc_scan_result_slope(const struct QcScanResult *res, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCOLLIDE_H */
