#ifndef COLLAR_H
#define COLLAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CollarPlaneMode {
  /**
   * `span(X, ∂_t)`.
   */
  COLLAR_PLANE_MODE_XT = 0,
  /**
   * `span(X, Y)`.
   */
  COLLAR_PLANE_MODE_XY = 1,
  /**
   * `span(X + a ∂_t, Y)`.
   */
  COLLAR_PLANE_MODE_MIXED = 2,
} CollarPlaneMode;

typedef enum CollarStatus {
  COLLAR_STATUS_OK = 0,
  COLLAR_STATUS_NULL_POINTER = 1,
  COLLAR_STATUS_INVALID_ARGUMENT = 2,
  COLLAR_STATUS_CONFIG = 3,
  COLLAR_STATUS_INFEASIBLE_BRIDGE = 4,
  COLLAR_STATUS_NUMERICAL = 5,
  COLLAR_STATUS_IO = 6,
  COLLAR_STATUS_UNSUPPORTED = 7,
  COLLAR_STATUS_PANIC = 8,
} CollarStatus;

/**
 * Opaque collar metric.
 */
typedef struct CollarMetric CollarMetric;

/**
 * Opaque verification report.
 */
typedef struct CollarReport CollarReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *collar_version(void);

/**
 * Message of the last failed call on this thread (empty after a success).
 * Valid until the next library call on the same thread.
 */
const char *collar_last_error(void);

/**
 * Builds the metric of a shipped preset at the given `kappa`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CollarStatus collar_metric_from_preset(const char *name,
                                            double kappa,
                                            struct CollarMetric **out);

/**
 * Builds the metric described by a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CollarStatus collar_metric_from_config(const char *toml, struct CollarMetric **out);

/**
 * Loads a metric artifact written by `collar build` or [`collar_metric_save`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CollarStatus collar_metric_load(const char *path, struct CollarMetric **out);

/**
 * # Safety
 * `metric` must come from this library; `path` must be a NUL-terminated string.
 */
enum CollarStatus collar_metric_save(const struct CollarMetric *metric, const char *path);

/**
 * # Safety
 * `metric` must come from this library and not be used afterwards. Null is ignored.
 */
void collar_metric_free(struct CollarMetric *metric);

/**
 * `kappa` of the far field, NaN for a null handle.
 *
 * # Safety
 * `metric` must be null or come from this library.
 */
double collar_metric_kappa(const struct CollarMetric *metric);

/**
 * Start of the far field `t0`, NaN for a null handle.
 *
 * # Safety
 * `metric` must be null or come from this library.
 */
double collar_metric_t0(const struct CollarMetric *metric);

/**
 * Dimension of the slices, 0 for a null handle.
 *
 * # Safety
 * `metric` must be null or come from this library.
 */
size_t collar_metric_slice_dim(const struct CollarMetric *metric);

/**
 * Writes `f(t), f'(t), f''(t)` to `out[0..3]`.
 *
 * # Safety
 * `metric` must come from this library; `out` must hold 3 doubles.
 */
enum CollarStatus collar_profile_eval(const struct CollarMetric *metric, double t, double *out);

/**
 * Sectional curvature of a plane in normal form at `(t, x)`. `x`, `u`
 * and `v` hold `dim` chart components each (`v` may be null for `XT`);
 * `u`, `v` must be `g_t`-orthonormal.
 *
 * # Safety
 * Array arguments must point to `dim` doubles; `out` must be valid.
 */
enum CollarStatus collar_sectional_curvature(const struct CollarMetric *metric,
                                             enum CollarPlaneMode mode,
                                             double t,
                                             const double *x,
                                             const double *u,
                                             const double *v,
                                             double a,
                                             size_t dim,
                                             double *out);

/**
 * Samples the lemma bounds on the default grid.
 *
 * # Safety
 * `metric` must come from this library; `out` must be valid.
 */
enum CollarStatus collar_verify_lemma_bounds(const struct CollarMetric *metric,
                                             struct CollarReport **out);

/**
 * 1 if every check passed, 0 if one failed, -1 for a null handle.
 *
 * # Safety
 * `report` must be null or come from this library.
 */
int collar_report_passed(const struct CollarReport *report);

/**
 * # Safety
 * `report` must be null or come from this library.
 */
size_t collar_report_check_count(const struct CollarReport *report);

/**
 * The report as CSV; free with [`collar_string_free`]. Null on a null handle.
 *
 * # Safety
 * `report` must be null or come from this library.
 */
char *collar_report_csv(const struct CollarReport *report);

/**
 * # Safety
 * `report` must come from this library and not be used afterwards. Null is ignored.
 */
void collar_report_free(struct CollarReport *report);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void collar_string_free(char *s);

/**
 * Smallest `kappa` in `[lo, hi]` above which the bridge condition holds at
 * `t0 = 1/sqrt(kappa)` for the preset's slice. `tangent_only` selects the
 * tangent condition alone; otherwise `f_cc(t0) > 1` is also required.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CollarStatus collar_scan_kappa_min(const char *name,
                                        double lo,
                                        double hi,
                                        size_t n,
                                        bool tangent_only,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLAR_H */
