#ifndef NECKFLOW_H
#define NECKFLOW_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  NF_STATUS_OK = 0,
  NF_STATUS_INVALID_ARGUMENT = 1,
  NF_STATUS_CONFIG_ERROR = 2,
  NF_STATUS_DOMAIN_ERROR = 3,
  NF_STATUS_NUMERIC_ERROR = 4,
  NF_STATUS_IO_ERROR = 5,
} NfStatus;

typedef struct NfFields NfFields;

typedef struct NfGeometry NfGeometry;

/**
 * Pointwise evaluation of one auxiliary velocity/pressure pair.
 */
typedef struct {
  double velocity[2];
  double pressure;
  /**
   * Row-major du_i/dx_j.
   */
  double velocity_gradient[4];
  /**
   * Per component: dxx, dxy, dyy.
   */
  double velocity_hessian[6];
  double pressure_gradient[2];
  double residual[2];
  double divergence;
} NfFieldEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *nf_last_error(void);

/**
 * Builds a geometry from the JSON run-configuration document (the same
 * schema the CLI accepts); only the `geometry` block is used.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
NfStatus nf_geometry_from_json(const char *json, NfGeometry **out);

/**
 * # Safety
 * `geom` must come from `nf_geometry_from_json` and not be freed twice.
 */
void nf_geometry_free(NfGeometry *geom);

/**
 * Gap width delta(x1) = eps + h1 + h2.
 *
 * # Safety
 * `geom` and `out` must be valid pointers.
 */
NfStatus nf_delta(const NfGeometry *geom, double x1, double *out);

/**
 * Region codes: 1 inside upper inclusion, 2 inside lower inclusion,
 * 3 inner neck fluid (|x1| < R), 4 outer neck fluid (R <= |x1| < 2R),
 * 5 outer fluid, 6 outside the container.
 */
NfStatus nf_classify(const NfGeometry *geom, double x, double y, int32_t *out);

/**
 * Builds the six-field auxiliary evaluator (quadratic profile only).
 *
 * # Safety
 * Pointer contract as in `nf_geometry_from_json`.
 */
NfStatus nf_fields_new(const NfGeometry *geom, NfFields **out);

/**
 * # Safety
 * `fields` must come from `nf_fields_new` and not be freed twice.
 */
void nf_fields_free(NfFields *fields);

/**
 * Evaluates field (inclusion, mode) at a fluid point. `inclusion` is 1 for
 * the upper body, 2 for the lower; `mode` is 1 (x-translation),
 * 2 (y-translation) or 3 (rotation).
 *
 * # Safety
 * Pointer contract as above.
 */
NfStatus nf_fields_eval(const NfFields *fields,
                        int32_t inclusion,
                        int32_t mode,
                        double x,
                        double y,
                        NfFieldEval *out);

/**
 * Runs the field identity suite and returns the JSON report.
 *
 * # Safety
 * Pointer contract as above; free the string with `nf_string_free`.
 */
NfStatus nf_fields_check_json(const NfGeometry *geom, uintptr_t samples, char **out_json);

/**
 * Runs a full gap-width sweep from a JSON configuration and returns the
 * sweep CSV and the verdict JSON.
 *
 * # Safety
 * Pointer contract as above; free both strings with `nf_string_free`.
 */
NfStatus nf_run_sweep_json(const char *config_json,
                           bool quick,
                           char **out_csv,
                           char **out_verdicts);

/**
 * Releases a string returned by this interface.
 *
 * # Safety
 * `s` must originate from this library and be freed exactly once.
 */
void nf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NECKFLOW_H */
