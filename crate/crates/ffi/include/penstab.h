#ifndef PENSTAB_H
#define PENSTAB_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum PenstabStatus {
  PENSTAB_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  PENSTAB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PENSTAB_STATUS_INVALID_UTF8 = 2,
  /**
   * JSON or schema validation failed.
   */
  PENSTAB_STATUS_INVALID_INPUT = 3,
  /**
   * Conditions of the requested procedure are not satisfied.
   */
  PENSTAB_STATUS_METHOD_FAILURE = 4,
  /**
   * A numerical routine failed (dichotomy, conditioning, divergence).
   */
  PENSTAB_STATUS_NUMERICAL_FAILURE = 5,
  /**
   * An internal invariant was violated.
   */
  PENSTAB_STATUS_PANIC = 6,
} PenstabStatus;

/**
 * Opaque parsed model handle.
 */
typedef struct PenstabModel PenstabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *penstab_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *penstab_version(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned through an out-parameter of
 * this library and not yet freed; NULL is accepted and ignored.
 */
void penstab_string_free(char *s);

/**
 * Parse a model JSON document into an opaque handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to a location that receives the handle on success.
 */
enum PenstabStatus penstab_model_parse(const char *json, struct PenstabModel **out);

/**
 * Release a model handle.
 *
 * # Safety
 * `model` must come from [`penstab_model_parse`] and not be used after
 * this call; NULL is accepted and ignored.
 */
void penstab_model_free(struct PenstabModel *model);

/**
 * Number of plant states of a parsed model.
 *
 * # Safety
 * `model` must be a live handle from [`penstab_model_parse`].
 */
uintptr_t penstab_model_states(const struct PenstabModel *model);

/**
 * Number of nonlinearity channels of a parsed model.
 *
 * # Safety
 * `model` must be a live handle from [`penstab_model_parse`].
 */
uintptr_t penstab_model_channels(const struct PenstabModel *model);

/**
 * Open-loop analysis; writes the JSON report to `report_out`.
 * `lambda` and `tau0` are optional (pass NaN).
 *
 * # Safety
 * `model` must be a live handle; `report_out` must be a valid pointer.
 */
enum PenstabStatus penstab_analyze(const struct PenstabModel *model,
                                   double lambda,
                                   double tau0,
                                   char **report_out);

/**
 * Controller synthesis. `theorem` selects the procedure (3, 4, 5, 6, 7
 * or 9); `tau` may be NULL (use the model's synthesis block); `lambda`
 * and `tau0` are optional (NaN). On success `report_out` receives the
 * JSON report and `controller_out` the controller file document.
 *
 * # Safety
 * `model` must be a live handle; `tau` (when non-NULL) must point to
 * `tau_len` doubles; `report_out` and `controller_out` must be valid.
 */
enum PenstabStatus penstab_synthesize(const struct PenstabModel *model,
                                      uint32_t theorem,
                                      double lambda,
                                      const double *tau,
                                      uintptr_t tau_len,
                                      double tau0,
                                      bool search,
                                      char **report_out,
                                      char **controller_out);

/**
 * Closed-loop (or open-loop) simulation. `controller_json` may be NULL
 * for the open loop; `x0` may be NULL for the model default. On success
 * `report_out` receives the JSON report and `csv_out` the trajectory
 * table.
 *
 * # Safety
 * `model` must be a live handle; `controller_json` (when non-NULL) must
 * be a valid string; `x0` (when non-NULL) must point to `x0_len`
 * doubles; `report_out` and `csv_out` must be valid pointers.
 */
enum PenstabStatus penstab_simulate(const struct PenstabModel *model,
                                    const char *controller_json,
                                    const double *x0,
                                    uintptr_t x0_len,
                                    double t_final,
                                    double dt,
                                    uintptr_t record_stride,
                                    bool shift_test,
                                    double tau0,
                                    char **report_out,
                                    char **csv_out);

/**
 * Frequency-sweep table ("omega,peak_sv,margin" CSV). `controller_json`
 * may be NULL; `lambda` is optional (NaN = model default or 0).
 *
 * # Safety
 * `model` must be a live handle; `controller_json` (when non-NULL) must
 * be a valid string; `csv_out` must be a valid pointer.
 */
enum PenstabStatus penstab_sweep(const struct PenstabModel *model,
                                 const char *controller_json,
                                 double lambda,
                                 double omega_min,
                                 double omega_max,
                                 uintptr_t points,
                                 char **csv_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENSTAB_H */
