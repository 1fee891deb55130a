#ifndef WKBDIFF_H
#define WKBDIFF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WkbStatus {
  WKB_STATUS_OK = 0,
  WKB_STATUS_NULL_POINTER = 1,
  WKB_STATUS_INVALID_INPUT = 2,
  WKB_STATUS_RANGE = 3,
  WKB_STATUS_DEGENERATE = 4,
  WKB_STATUS_BRANCH_AMBIGUITY = 5,
  WKB_STATUS_SINGULARITY = 6,
  WKB_STATUS_CONVERGENCE = 7,
  WKB_STATUS_PANIC = 8,
} WkbStatus;

// Opaque momentum branch.
typedef struct WkbBranch WkbBranch;

// Opaque matrix model.
typedef struct WkbMatrix WkbMatrix;

typedef struct WkbComplex {
  double re;
  double im;
} WkbComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, as a static NUL-terminated string.
const char *wkb_version(void);

// Message for the last failed call on this thread, or NULL.
// Valid until the next call into the library from the same thread.
const char *wkb_last_error_message(void);

// Harper companion matrix with potential `2λ cos 2πz + μ`.
//
// # Safety
// `out_matrix` must be a valid pointer.
enum WkbStatus wkb_matrix_harper(double lambda, double mu, struct WkbMatrix **out_matrix);

// Matrix from its JSON description (same format as the `matrix` field of a scenario).
//
// # Safety
// `json` must be a NUL-terminated string and `out_matrix` a valid pointer.
enum WkbStatus wkb_matrix_from_json(const char *json, struct WkbMatrix **out_matrix);

// # Safety
// `m` must come from a `wkb_matrix_*` constructor and not be freed twice. NULL is ignored.
void wkb_matrix_free(struct WkbMatrix *m);

// Writes `M(z)` row-major into `out4[0..4]`.
//
// # Safety
// `m` must be a live handle and `out4` must point to 4 writable elements.
enum WkbStatus wkb_matrix_eval(const struct WkbMatrix *m,
                               struct WkbComplex z,
                               struct WkbComplex *out4);

// Branch of the momentum through `z_ref` with the default root there.
//
// # Safety
// `m` must be a live handle and `out_branch` a valid pointer.
enum WkbStatus wkb_branch_new(const struct WkbMatrix *m,
                              struct WkbComplex z_ref,
                              struct WkbBranch **out_branch);

// Branch through `z_ref` taking the value `p_ref` there.
//
// # Safety
// `m` must be a live handle and `out_branch` a valid pointer.
enum WkbStatus wkb_branch_new_with_value(const struct WkbMatrix *m,
                                         struct WkbComplex z_ref,
                                         struct WkbComplex p_ref,
                                         struct WkbBranch **out_branch);

// # Safety
// `b` must come from a `wkb_branch_*` constructor and not be freed twice. NULL is ignored.
void wkb_branch_free(struct WkbBranch *b);

// Momentum continued along the straight segment from the base point to `z`.
//
// # Safety
// `b` must be a live handle and `out_p` a valid pointer.
enum WkbStatus wkb_momentum_at(const struct WkbBranch *b,
                               struct WkbComplex z,
                               struct WkbComplex *out_p);

// Density `ω±(z)` of the phase differential; `sign` is +1 or -1.
//
// # Safety
// `b` must be a live handle and `out_w` a valid pointer.
enum WkbStatus wkb_omega_density(const struct WkbBranch *b,
                                 struct WkbComplex z,
                                 int sign_,
                                 struct WkbComplex *out_w);

// Integral of `Ω±` along the polyline `path[0..len]`.
// `out_error` may be NULL.
//
// # Safety
// `b` must be a live handle, `path` must hold `len` elements, `out_value` must be valid.
enum WkbStatus wkb_phase_integral(const struct WkbBranch *b,
                                  const struct WkbComplex *path,
                                  size_t len,
                                  int sign_,
                                  double tol,
                                  struct WkbComplex *out_value,
                                  double *out_error);

// Residue of `Ω±` at `center`. `radius <= 0` and `turns == 0` pick automatic values.
// `out_turns` may be NULL.
//
// # Safety
// `b` must be a live handle and `out_value` a valid pointer.
enum WkbStatus wkb_residue(const struct WkbBranch *b,
                           struct WkbComplex center,
                           int sign_,
                           double radius,
                           uint32_t turns,
                           struct WkbComplex *out_value,
                           uint32_t *out_turns);

// Runs a scenario given as JSON. On success `*out_report` receives the canonical
// report (release with [`wkb_string_free`]) and `*out_passed` is 1 if every check passed.
//
// # Safety
// `json` must be NUL-terminated; `out_report` and `out_passed` must be valid.
enum WkbStatus wkb_run_scenario(const char *json, char **out_report, int *out_passed);

// # Safety
// `s` must come from this library and not be freed twice. NULL is ignored.
void wkb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WKBDIFF_H */
