/* C interface to the nsk laboratory. All handles are opaque; every fallible call reports through NskStatus and nsk_last_error_message(). */

#ifndef NSK_H
#define NSK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by fallible calls.
 */
typedef enum NskStatus {
  NskOk = 0,
  /**
   * A null pointer, invalid UTF-8, or out-of-range argument.
   */
  NskErrArgument = 1,
  /**
   * Configuration or validation failure (parallels process exit code 2).
   */
  NskErrConfig = 2,
  /**
   * Solver failure: vacuum or retry-cap exhaustion (exit code 3).
   */
  NskErrRun = 3,
} NskStatus;

/**
 * Opaque configuration handle.
 */
typedef struct NskConfig NskConfig;

/**
 * Opaque result handle: the record series plus the run's error marker.
 */
typedef struct NskSeries NskSeries;

/**
 * One entropy record row (mirrors the series.csv schema).
 */
typedef struct NskRecord {
  double t;
  double mass;
  double e_total;
  double e_kinetic_w;
  double e_drift_v;
  double e_pressure_h;
  double e_drag_h;
  double d_capillary;
  double d_pressure;
  double d_drag;
  double d_z1_quartic;
  double dissipation_residual;
} NskRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or null. Valid until the next
 * failing call from the same thread; do not free.
 */
const char *nsk_last_error_message(void);

/**
 * Library version string; static storage, do not free.
 */
const char *nsk_version(void);

/**
 * Parse a TOML configuration (empty string = documented defaults).
 * Returns null on failure; see [`nsk_last_error_message`].
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated string or null (treated as "").
 */
struct NskConfig *nsk_config_parse(const char *toml_text);

/**
 * Apply one dotted-path override, e.g. key "viscosity.alpha", value "0.75".
 *
 * # Safety
 * `config` must be a live handle from [`nsk_config_parse`]; `key` and
 * `value` must be valid NUL-terminated strings.
 */
enum NskStatus nsk_config_set(struct NskConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must come from [`nsk_config_parse`] and not be freed twice.
 */
void nsk_config_free(struct NskConfig *config);

/**
 * Run the configured experiment. On solver failure (vacuum, retry cap) the
 * partial series is still returned in `out` together with `NskErrRun`.
 *
 * # Safety
 * `config` must be a live handle; `out` must point to writable storage.
 */
enum NskStatus nsk_simulate(const struct NskConfig *config,
                            int override_admissibility,
                            struct NskSeries **out);

/**
 * Number of entropy records in the series. Zero for a null handle.
 *
 * # Safety
 * `series` must be a live handle or null.
 */
uintptr_t nsk_series_len(const struct NskSeries *series);

/**
 * 1 when the run ended early (vacuum / retry cap), else 0.
 *
 * # Safety
 * `series` must be a live handle.
 */
int nsk_series_failed(const struct NskSeries *series);

/**
 * Copy record `index` into `out`.
 *
 * # Safety
 * `series` must be a live handle; `out` must point to writable storage.
 */
enum NskStatus nsk_series_record(const struct NskSeries *series,
                                 uintptr_t index,
                                 struct NskRecord *out);

/**
 * Least-squares decay rate of the modulated energy over `[t0, t1]`.
 *
 * # Safety
 * `series` must be a live handle; `c` and `r_squared` must be writable.
 */
enum NskStatus nsk_series_fit(const struct NskSeries *series,
                              double t0,
                              double t1,
                              double *c,
                              double *r_squared);

/**
 * 1 when the series is monotone nonincreasing within the run's entropy
 * budget, else 0.
 *
 * # Safety
 * `series` must be a live handle.
 */
int nsk_series_monotone(const struct NskSeries *series);

/**
 * # Safety
 * `series` must come from [`nsk_simulate`] and not be freed twice.
 */
void nsk_series_free(struct NskSeries *series);

/**
 * Admissibility report for the configured law/pressure pair as a JSON
 * string. Free with [`nsk_string_free`]; null on failure.
 *
 * # Safety
 * `config` must be a live handle.
 */
char *nsk_check_law_json(const struct NskConfig *config);

/**
 * # Safety
 * `s` must be a string returned by this library, freed exactly once.
 */
void nsk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSK_H */
