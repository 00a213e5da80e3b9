#ifndef OULAB_H
#define OULAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum OulabStatus {
  OULAB_STATUS_OK = 0,
  OULAB_STATUS_NULL_POINTER = 1,
  OULAB_STATUS_INVALID_INPUT = 2,
  OULAB_STATUS_NUMERICAL = 3,
  OULAB_STATUS_BUFFER_TOO_SMALL = 4,
  OULAB_STATUS_PANIC = 5,
} OulabStatus;

/**
 * Opaque model handle.
 */
typedef struct OulabModel OulabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *oulab_last_error(void);

/**
 * Builds a model from the drift `a` (n x n) and noise embedding `i_factor` (n x m).
 *
 * # Safety
 * `a` and `i_factor` must point to `n*n` and `n*m` doubles; `out` must be writable.
 */
enum OulabStatus oulab_model_new(const double *a,
                                 const double *i_factor,
                                 uintptr_t n,
                                 uintptr_t m,
                                 struct OulabModel **out);

/**
 * Builds one of the named builtin models.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum OulabStatus oulab_model_builtin(const char *name, struct OulabModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void oulab_model_free(struct OulabModel *model);

/**
 * State dimension, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
uintptr_t oulab_model_dim(const struct OulabModel *model);

/**
 * Invariant covariance, written row-major into `out` (n*n values).
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `len` doubles.
 */
enum OulabStatus oulab_solve_lyapunov(const struct OulabModel *model, double *out, uintptr_t len);

/**
 * Gramian `Q_t`, written row-major into `out` (n*n values).
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `len` doubles.
 */
enum OulabStatus oulab_gramian(const struct OulabModel *model,
                               double t,
                               double *out,
                               uintptr_t len);

/**
 * Operator norm of the semigroup on the invariant space at time `t`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum OulabStatus oulab_s_infinity_norm(const struct OulabModel *model, double t, double *out);

/**
 * Full diagnostics report as a JSON string; release it with [`oulab_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum OulabStatus oulab_analyze_json(const struct OulabModel *model, char **out);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void oulab_string_free(char *s);

/**
 * `sup <Q x, x> / <R x, x>` for symmetric PSD `q`, `r` (n x n); +infinity
 * when ker R is not inside ker Q.
 *
 * # Safety
 * `q` and `r` must point to `n*n` doubles; `out` must be writable.
 */
enum OulabStatus oulab_pencil_sup_ratio(const double *q, const double *r, uintptr_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OULAB_H */
