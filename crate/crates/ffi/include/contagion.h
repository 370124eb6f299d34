#ifndef CONTAGION_H
#define CONTAGION_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtgStatus {
  CTG_STATUS_OK = 0,
  CTG_STATUS_NULL_POINTER = 1,
  CTG_STATUS_INVALID_ARGUMENT = 2,
  CTG_STATUS_NUMERICAL = 3,
  CTG_STATUS_RECIPROCITY = 4,
  CTG_STATUS_BUFFER_TOO_SMALL = 5,
  CTG_STATUS_PANIC = 6,
} CtgStatus;

typedef enum CtgAssignmentMode {
  CTG_ASSIGNMENT_MODE_DETERMINISTIC_PROPORTIONS = 0,
  CTG_ASSIGNMENT_MODE_IID_SAMPLE = 1,
} CtgAssignmentMode;

typedef struct CtgEnvironment CtgEnvironment;

typedef struct CtgLimitSolution CtgLimitSolution;

typedef struct CtgPortfolio CtgPortfolio;

// One firm type with its mixture weight.
typedef struct CtgFirmClass {
  double alpha;
  double beta;
  double gamma;
  double exposure;
  double weight;
} CtgFirmClass;

// Limit loss variance at one horizon.
typedef struct CtgVarianceReport {
  double horizon;
  double l;
  double static_var;
  double contagion_var;
  double total;
  double b;
} CtgVarianceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to fit) and returns the full message length in bytes, without
// the terminator. Returns 0 when the last call succeeded.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ctg_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ctg_version(void);

// Validates `len` classes and creates an environment.
//
// # Safety
// `classes` must point to `len` readable elements; `out` must be writable.
enum CtgStatus ctg_environment_new(const struct CtgFirmClass *classes,
                                   size_t len,
                                   struct CtgEnvironment **out);

// # Safety
// `env` must be null or a handle from [`ctg_environment_new`], freed once.
void ctg_environment_free(struct CtgEnvironment *env);

// Number of distinct classes after merging duplicates; 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t ctg_environment_len(const struct CtgEnvironment *env);

// Checks `beta = b * alpha` across classes and writes `b` and the largest residual.
//
// # Safety
// `env` must be a live handle; `b` and `max_residual` must be writable.
enum CtgStatus ctg_check_reciprocity(const struct CtgEnvironment *env,
                                     double tol,
                                     double *b,
                                     double *max_residual);

// Builds a portfolio of `n` firms.
//
// # Safety
// `env` must be a live handle; `out` must be writable.
enum CtgStatus ctg_portfolio_new(const struct CtgEnvironment *env,
                                 size_t n,
                                 enum CtgAssignmentMode mode,
                                 uint64_t seed,
                                 struct CtgPortfolio **out);

// # Safety
// `portfolio` must be null or a handle from [`ctg_portfolio_new`], freed once.
void ctg_portfolio_free(struct CtgPortfolio *portfolio);

// Writes the number of firms of each class into `counts` (`len` >= classes).
//
// # Safety
// `portfolio` must be a live handle; `counts` valid for `len` writes.
enum CtgStatus ctg_portfolio_class_counts(const struct CtgPortfolio *portfolio,
                                          size_t *counts,
                                          size_t len);

// Monte Carlo mean loss fraction and `N * Var(L/N)` at each of `grid_len`
// sorted times in `[0, horizon]`. Needs at least 2 replicas.
//
// # Safety
// `t_grid`, `mean_loss` and `var_scaled_loss` must each be valid for `grid_len` elements.
enum CtgStatus ctg_monte_carlo_loss(const struct CtgPortfolio *portfolio,
                                    double horizon,
                                    const double *t_grid,
                                    size_t grid_len,
                                    size_t replicas,
                                    uint64_t seed,
                                    double *mean_loss,
                                    double *var_scaled_loss);

// Solves the limit equation on `grid_size` RK4 steps over `[0, horizon]`.
//
// # Safety
// `env` must be a live handle; `out` must be writable.
enum CtgStatus ctg_limit_solve(const struct CtgEnvironment *env,
                               double horizon,
                               size_t grid_size,
                               double tolerance,
                               struct CtgLimitSolution **out);

// # Safety
// `sol` must be null or a handle from [`ctg_limit_solve`], freed once.
void ctg_limit_free(struct CtgLimitSolution *sol);

// Number of grid points (`grid_size + 1`); 0 for a null handle.
//
// # Safety
// `sol` must be null or a live handle.
size_t ctg_limit_grid_len(const struct CtgLimitSolution *sol);

// # Safety
// `sol` must be a live handle; `buf` valid for `len` writes.
enum CtgStatus ctg_limit_copy_t(const struct CtgLimitSolution *sol, double *buf, size_t len);

// Default probability curve of class `k`.
//
// # Safety
// `sol` must be a live handle; `buf` valid for `len` writes.
enum CtgStatus ctg_limit_copy_q(const struct CtgLimitSolution *sol,
                                size_t k,
                                double *buf,
                                size_t len);

// Aggregate variable `m(t)`.
//
// # Safety
// `sol` must be a live handle; `buf` valid for `len` writes.
enum CtgStatus ctg_limit_copy_m(const struct CtgLimitSolution *sol, double *buf, size_t len);

// Limit loss per firm `l(t)`.
//
// # Safety
// `sol` must be a live handle; `buf` valid for `len` writes.
enum CtgStatus ctg_limit_copy_loss(const struct CtgLimitSolution *sol, double *buf, size_t len);

// Limit variance of the loss at grid time `t`. Reciprocity is checked with
// `reciprocity_tol`.
//
// # Safety
// `sol` must be a live handle; `out` must be writable.
enum CtgStatus ctg_variance_horizon(const struct CtgLimitSolution *sol,
                                    double t,
                                    double reciprocity_tol,
                                    struct CtgVarianceReport *out);

// Gaussian approximation of `P(L_N / N >= x)` for a portfolio of `n` firms.
//
// # Safety
// `report` must be readable; `out` must be writable.
enum CtgStatus ctg_excess_prob(const struct CtgVarianceReport *report,
                               size_t n,
                               double x,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTAGION_H */
