#ifndef ROBUST_DID_H
#define ROBUST_DID_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Ok` is zero; every library error has its own code.
 */
typedef enum RdidStatus {
  RDID_STATUS_OK = 0,
  RDID_STATUS_NULL_POINTER = 1,
  RDID_STATUS_INVALID_UTF8 = 2,
  RDID_STATUS_PANIC = 3,
  RDID_STATUS_IO = 10,
  RDID_STATUS_PARSE = 11,
  RDID_STATUS_MISSING_COLUMN = 12,
  RDID_STATUS_NON_NUMERIC_OUTCOME = 13,
  RDID_STATUS_MISSING_VALUE = 14,
  RDID_STATUS_DUPLICATE_UNIT_PERIOD = 15,
  RDID_STATUS_EMPTY_DATASET = 16,
  RDID_STATUS_INVALID_PANEL = 17,
  RDID_STATUS_EMPTY_CELL = 18,
  RDID_STATUS_INVALID_INFORMATION_SET = 19,
  RDID_STATUS_NEEDS_AT_LEAST_TWO_PERIODS = 20,
  RDID_STATUS_DIMENSION_MISMATCH = 21,
  RDID_STATUS_SINGLE_CLASS = 22,
  RDID_STATUS_SEPARATION_DETECTED = 23,
  RDID_STATUS_DEGENERATE_DESIGN = 24,
  RDID_STATUS_COLLINEAR_DESIGN = 25,
  RDID_STATUS_NO_TREATED_UNITS = 26,
  RDID_STATUS_ALL_PROPENSITIES_CLIPPED = 27,
  RDID_STATUS_TOO_MANY_FAILED_REPLICATES = 28,
  RDID_STATUS_INSUFFICIENT_REPLICATES = 29,
  RDID_STATUS_UNBALANCED_PANEL = 30,
  RDID_STATUS_TREATMENT_REVERSAL_IN_STAGGERED_MODE = 31,
  RDID_STATUS_WEIGHT_SUM_INVALID = 32,
  RDID_STATUS_EMPTY_DONOR_POOL = 33,
  RDID_STATUS_MISSING_PERIOD = 34,
  RDID_STATUS_NEGATIVE_M = 35,
  RDID_STATUS_INVALID_SPEC = 36,
  RDID_STATUS_INVALID_ARGUMENT = 37,
} RdidStatus;

/**
 * Opaque dataset handle.
 */
typedef struct RdidPanel RdidPanel;

/**
 * Bias-set bounds on the post-period effect.
 */
typedef struct RdidInterval {
  double lower;
  double upper;
  /**
   * θ_OLS, the difference in post-period means.
   */
  double point_estimate;
  double standard_did;
} RdidInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next library call on the same thread.
 */
const char *rdid_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *rdid_version(void);

/**
 * Version of the JSON documents returned by `rdid_run_json`.
 */
const char *rdid_schema_version(void);

/**
 * Loads a CSV. `schema_json` maps columns (null for the defaults
 * `unit, period, outcome, treatment`).
 *
 * # Safety
 * `path` must be a NUL-terminated string, `schema_json` null or one, and
 * `out` a valid pointer. On success `*out` owns a handle for
 * `rdid_panel_free`.
 */
enum RdidStatus rdid_panel_load_csv(const char *path,
                                    const char *schema_json,
                                    struct RdidPanel **out);

/**
 * Builds a panel without covariates from parallel arrays of length `n`.
 * Units are identified by integer ids.
 *
 * # Safety
 * Each array must hold `n` elements; `out` must be valid.
 */
enum RdidStatus rdid_panel_from_arrays(size_t n,
                                       const int64_t *unit,
                                       const int64_t *period,
                                       const double *outcome,
                                       const int64_t *treated,
                                       struct RdidPanel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `p` must be null or a handle from this library not yet freed.
 */
void rdid_panel_free(struct RdidPanel *p);

/**
 * Number of units, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t rdid_panel_n_units(const struct RdidPanel *p);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t rdid_panel_n_rows(const struct RdidPanel *p);

/**
 * Bias-set bounds over the given pre-periods (`n_info == 0` uses all).
 *
 * # Safety
 * `p` must be a live handle, `info_periods` valid for `n_info` reads and
 * `out` valid for one write.
 */
enum RdidStatus rdid_bounds(const struct RdidPanel *p,
                            const int64_t *info_periods,
                            size_t n_info,
                            struct RdidInterval *out);

/**
 * Runs `command` (`bounds`, `po`, `forecast`, `event_study`, `sc_bounds`
 * or `validate`) with JSON options and returns the JSON report in
 * `*out_json`, to be released with `rdid_string_free`.
 *
 * # Safety
 * `p` must be a live handle, `command` a NUL-terminated string,
 * `options_json` null or one, and `out_json` valid for one write.
 */
enum RdidStatus rdid_run_json(const struct RdidPanel *p,
                              const char *command,
                              const char *options_json,
                              char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from `rdid_run_json` not yet freed.
 */
void rdid_string_free(char *s);

/**
 * Truncated standard-normal means `E[U | U ≥ c]` and `E[U | U < c]`.
 *
 * # Safety
 * `alpha1` and `alpha0` must be valid for one write.
 */
enum RdidStatus rdid_mills_alpha(double c, double *alpha1, double *alpha0);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_DID_H */
