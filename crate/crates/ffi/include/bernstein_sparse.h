#ifndef BERNSTEIN_SPARSE_H
#define BERNSTEIN_SPARSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  // A parameter is outside its domain or a length is too small.
  BS_STATUS_INVALID_ARGUMENT = 2,
  // The data could not be used (non-finite values, zero-variance column, ...).
  BS_STATUS_DATA_ERROR = 3,
  // The solver hit its iteration cap; outputs hold the last iterate.
  BS_STATUS_NO_CONVERGENCE = 4,
  // The requested path cell was skipped by the continuity guard.
  BS_STATUS_SKIPPED = 5,
  BS_STATUS_INTERNAL = 6,
  BS_STATUS_PANIC = 7,
} BsStatus;

// Final state of a CM run.
typedef struct BsCmResult BsCmResult;

// Standardized regression data.
typedef struct BsDataset BsDataset;

// Solved `(alpha, eta)` grid.
typedef struct BsPath BsPath;

// Threshold operator output.
typedef struct BsDecision {
  double estimate;
  // Nonzero root of the stationarity equation, 0 if inactive.
  double kappa;
  // Boundary of the discontinuous regime, 0 in the continuous regime.
  double sstar;
  bool active;
  bool discontinuous;
  // 0 analytic, 1 bisection, 2 soft threshold.
  int32_t method;
} BsDecision;

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length including the NUL, or
// 0 when there is no message.
//
// # Safety
// `buf` must be NULL or point to `len` writable bytes.
size_t bs_last_error_message(char *buf, size_t len);

// Penalty value `Phi_rho(s)`, `rho <= 1`, `s >= 0`.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_phi(double rho, double s, double *out);

// First derivative `Phi'_rho(s)`.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_phi_d1(double rho, double s, double *out);

// Second derivative `Phi''_rho(s)`.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_phi_d2(double rho, double s, double *out);

// Divergence generator `phi_rho(z)`, `z >= 0`.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_varphi(double rho, double z, double *out);

// `min_w { w s + phi_rho(w) }` via the closed-form minimizer.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_conjugate_phi(double rho, double s, double *out);

// MCP value `s - s^2/2` for `s < 1`, `1/2` beyond, obtained from its conjugate form.
//
// # Safety
// `out` must be NULL or point to a writable `double`.
enum BsStatus bs_mcp_conjugate(double s, double *out);

// Threshold operator `S_alpha(z, eta)` for penalty `rho`.
//
// # Safety
// `out` must be NULL or point to a writable `BsDecision`.
enum BsStatus bs_threshold(double rho, double alpha, double z, double eta, struct BsDecision *out);

// Standardizes `x` (row-major `n x p`) and `y` (length `n`) into a new dataset.
//
// # Safety
// `x` must point to `n * p` doubles, `y` to `n` doubles, `out` to a writable
// pointer. Release the handle with [`bs_dataset_free`].
enum BsStatus bs_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t p,
                             struct BsDataset **out);

// # Safety
// `ds` must be NULL or a handle from [`bs_dataset_new`] not yet freed.
void bs_dataset_free(struct BsDataset *ds);

// Number of observations, 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bs_dataset_n(const struct BsDataset *ds);

// Number of predictors, 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bs_dataset_p(const struct BsDataset *ds);

// Coordinate descent for one `(rho, alpha, eta)` from a zero start. Writes
// `p` standardized coefficients. Returns `BS_STATUS_NO_CONVERGENCE` with the
// last iterate written when the sweep cap is hit.
//
// # Safety
// `ds` must be a live dataset; `coef` must hold `len` doubles; `sweeps` and
// `objective` may be NULL.
enum BsStatus bs_cd_fit(const struct BsDataset *ds,
                        double rho,
                        double alpha,
                        double eta,
                        bool allow_discontinuous,
                        double *coef,
                        size_t len,
                        size_t *sweeps,
                        double *objective);

// Solves the default grid with `n_etas` eta values and `n_alphas` alpha
// values. The handle is created even if some cells did not converge.
//
// # Safety
// `ds` must be a live dataset and `out` a writable pointer. Release the handle
// with [`bs_path_free`].
enum BsStatus bs_path_new(const struct BsDataset *ds,
                          double rho,
                          size_t n_etas,
                          size_t n_alphas,
                          bool allow_discontinuous,
                          struct BsPath **out);

// # Safety
// `path` must be NULL or a handle from [`bs_path_new`] not yet freed.
void bs_path_free(struct BsPath *path);

// Number of eta values (L), 0 for NULL.
//
// # Safety
// `path` must be NULL or a live path handle.
size_t bs_path_n_etas(const struct BsPath *path);

// Number of alpha values (K), 0 for NULL.
//
// # Safety
// `path` must be NULL or a live path handle.
size_t bs_path_n_alphas(const struct BsPath *path);

// Grid values of cell `(k, l)`: `alpha_k` (descending in `k`) and `eta_l`
// (ascending in `l`).
//
// # Safety
// `path` must be a live path handle; `alpha` and `eta` may be NULL.
enum BsStatus bs_path_grid(const struct BsPath *path,
                           size_t k,
                           size_t l,
                           double *alpha,
                           double *eta);

// Standardized coefficients of cell `(k, l)`. Returns `BS_STATUS_SKIPPED`
// for cells refused by the continuity guard.
//
// # Safety
// `path` must be a live path handle and `coef` must hold `len` doubles.
enum BsStatus bs_path_coefficients(const struct BsPath *path,
                                   size_t k,
                                   size_t l,
                                   double *coef,
                                   size_t len);

// Runs CM. `w0` may be NULL for the default `0.5 * max_j |x_j^T y|` level;
// otherwise it must hold `p` positive weights. `tol <= 0` and `max_iter == 0`
// select the defaults.
//
// # Safety
// `ds` must be a live dataset, `w0` NULL or `p` doubles, `out` a writable
// pointer. Release the handle with [`bs_cm_result_free`].
enum BsStatus bs_cm_solve(const struct BsDataset *ds,
                          double rho,
                          double alpha,
                          const double *w0,
                          double tol,
                          size_t max_iter,
                          struct BsCmResult **out);

// # Safety
// `res` must be NULL or a handle from [`bs_cm_solve`] not yet freed.
void bs_cm_result_free(struct BsCmResult *res);

// Number of CM iterations, 0 for NULL.
//
// # Safety
// `res` must be NULL or a live CM handle.
size_t bs_cm_result_iterations(const struct BsCmResult *res);

// Whether the run met its stopping rule; false for NULL.
//
// # Safety
// `res` must be NULL or a live CM handle.
bool bs_cm_result_converged(const struct BsCmResult *res);

// Final standardized coefficients (`p` values).
//
// # Safety
// `res` must be a live CM handle and `out` must hold `len` doubles.
enum BsStatus bs_cm_result_coefficients(const struct BsCmResult *res, double *out, size_t len);

// Final weights `eta` (`p` values).
//
// # Safety
// `res` must be a live CM handle and `out` must hold `len` doubles.
enum BsStatus bs_cm_result_eta(const struct BsCmResult *res, double *out, size_t len);

// Length of the objective trace (iterations + 1), 0 for NULL.
//
// # Safety
// `res` must be NULL or a live CM handle.
size_t bs_cm_result_trace_len(const struct BsCmResult *res);

// Objective values from the initial point through the last iteration.
//
// # Safety
// `res` must be a live CM handle and `out` must hold `len` doubles.
enum BsStatus bs_cm_result_trace(const struct BsCmResult *res, double *out, size_t len);

#endif  /* BERNSTEIN_SPARSE_H */
