#ifndef NARROW_DBM_H
#define NARROW_DBM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DbmStatus {
  DBM_STATUS_OK = 0,
  DBM_STATUS_NULL_POINTER = 1,
  DBM_STATUS_INVALID_UTF8 = 2,
  DBM_STATUS_DIMENSION = 3,
  DBM_STATUS_DOMAIN = 4,
  DBM_STATUS_INDEX = 5,
  DBM_STATUS_PARSE = 6,
  DBM_STATUS_ARCHITECTURE = 7,
  /**
   * The compiler missed the tolerance; the best model is still returned.
   */
  DBM_STATUS_CONVERGENCE = 8,
  DBM_STATUS_ORACLE_LIMIT = 9,
  DBM_STATUS_BUFFER_TOO_SMALL = 10,
  DBM_STATUS_OTHER = 11,
  DBM_STATUS_PANIC = 12,
} DbmStatus;

/**
 * Opaque model handle.
 */
typedef struct DbmModel DbmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the
 * library; valid until the next call.
 */
const char *dbm_last_error(void);

/**
 * Parse a model from NUL-terminated JSON.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum DbmStatus dbm_model_from_json(const char *json, struct DbmModel **out);

/**
 * Serialize a model to JSON; release the string with `dbm_string_free`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DbmStatus dbm_model_to_json(const struct DbmModel *model, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void dbm_string_free(char *s);

/**
 * # Safety
 * `model` must come from this library or be null; it must not be used afterwards.
 */
void dbm_model_free(struct DbmModel *model);

/**
 * Model with all parameters zero; `widths` has `n_widths` entries (`L + 1`).
 *
 * # Safety
 * `widths` must point to `n_widths` readable values and `out` be valid.
 */
enum DbmStatus dbm_model_zeros(size_t q,
                               const size_t *widths,
                               size_t n_widths,
                               struct DbmModel **out);

/**
 * Number of hidden layers `L`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum DbmStatus dbm_model_depth(const struct DbmModel *model, size_t *out);

/**
 * Width of layer `k`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum DbmStatus dbm_model_layer_width(const struct DbmModel *model, size_t k, size_t *out);

/**
 * Exact `log Z`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid.
 */
enum DbmStatus dbm_log_partition(const struct DbmModel *model, double *out);

/**
 * Exact marginal of layer `k` in enumeration order. `*written` receives the
 * number of states; when `capacity` is smaller nothing is copied and
 * `DBM_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `model` must be a live handle, `buf` writable for `capacity` values
 * (may be null when `capacity` is 0) and `written` valid.
 */
enum DbmStatus dbm_layer_marginal(const struct DbmModel *model,
                                  size_t k,
                                  double *buf,
                                  size_t capacity,
                                  size_t *written);

/**
 * Compile a target over `n` units with alphabet `q` (`q^n` probabilities).
 * `width` 0 selects the visible width. On `DBM_STATUS_CONVERGENCE` the best
 * model and its KL are still returned.
 *
 * # Safety
 * `probs` must point to `len` readable values; `out` and `kl` must be valid.
 */
enum DbmStatus dbm_compile(size_t n,
                           size_t q,
                           const double *probs,
                           size_t len,
                           double tolerance,
                           double beta0,
                           double max_beta,
                           size_t width,
                           struct DbmModel **out,
                           double *kl);

/**
 * Sufficient depth for `n >= 2` units with alphabet `q`.
 *
 * # Safety
 * `out` must be valid.
 */
enum DbmStatus dbm_sufficient_depth(size_t n, size_t q, uint64_t *out);

/**
 * Depth below which some distribution cannot be represented.
 *
 * # Safety
 * `out` must be valid.
 */
enum DbmStatus dbm_necessary_depth(size_t n, size_t q, uint64_t *out);

/**
 * Smallest first hidden width for `n0` binary visible units.
 *
 * # Safety
 * `out` must be valid.
 */
enum DbmStatus dbm_min_first_hidden_width(size_t n0, size_t *out);

/**
 * Free parameters of a width-`n`, depth-`layers` model with alphabet `q`.
 *
 * # Safety
 * `out` must be valid.
 */
enum DbmStatus dbm_param_count(uint64_t n, uint64_t layers, uint64_t q, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NARROW_DBM_H */
