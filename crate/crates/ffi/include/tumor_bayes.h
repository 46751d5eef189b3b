#ifndef TUMOR_BAYES_H
#define TUMOR_BAYES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_INVALID_ARGUMENT = 2,
  // Invalid configuration or input data.
  TB_STATUS_VALIDATION = 3,
  // A computation failed (solver, sampler, estimator).
  TB_STATUS_RUNTIME = 4,
  TB_STATUS_IO = 5,
  TB_STATUS_PANIC = 6,
  // Output buffer too small; the required size was written.
  TB_STATUS_BUFFER_TOO_SMALL = 7,
} TbStatus;

// Parsed experiment file.
typedef struct TbExperiment TbExperiment;

// Uniform 1D or 2D mesh.
typedef struct TbGrid TbGrid;

// Experiment forward model with synthetic data attached.
typedef struct TbProblem TbProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next `tb_*` call on the same thread.
const char *tb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tb_version(void);

// Creates a 2D grid on `[xlo, xhi] x [ylo, yhi]` with `nx x ny` cells.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum TbStatus tb_grid_new_2d(double xlo,
                             double xhi,
                             double ylo,
                             double yhi,
                             uintptr_t nx,
                             uintptr_t ny,
                             struct TbGrid **out);

// Creates a 1D grid on `[lo, hi]` with `n` cells.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum TbStatus tb_grid_new_1d(double lo, double hi, uintptr_t n, struct TbGrid **out);

// Number of cells, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a handle from `tb_grid_new_*`.
uintptr_t tb_grid_num_cells(const struct TbGrid *grid);

// # Safety
// `grid` must be null or a handle from `tb_grid_new_*` not yet freed.
void tb_grid_free(struct TbGrid *grid);

// Solves the forward problem from `rho0` with cell growth rates `h` and
// writes the density at `t_final` into `rho_out`. All arrays hold
// `num_cells` values ordered `j * nx + i`.
//
// # Safety
// `grid` must be a valid handle; the arrays must hold `num_cells` values.
enum TbStatus tb_solve_forward(const struct TbGrid *grid,
                               const double *rho0,
                               const double *h,
                               uintptr_t num_cells,
                               double m,
                               double dt,
                               double t_final,
                               double *rho_out);

// Parses and validates an experiment file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum TbStatus tb_experiment_load(const char *path, struct TbExperiment **out);

// Number of unknowns of the experiment's prior, or 0 for a null handle.
//
// # Safety
// `exp` must be null or a valid handle.
uintptr_t tb_experiment_dim(const struct TbExperiment *exp);

// Copies the true parameter vector into `out` (`len >= dim`).
//
// # Safety
// `exp` must be a valid handle and `out` must hold `len` values.
enum TbStatus tb_experiment_truth(const struct TbExperiment *exp, double *out, uintptr_t len);

// # Safety
// `exp` must be null or a handle not yet freed.
void tb_experiment_free(struct TbExperiment *exp);

// Builds the inverse problem of an experiment at exponent `m` and noise
// level `sigma`, with data synthesized from the truth using `data_seed`.
//
// # Safety
// `exp` must be a valid handle; `out` must be writable.
enum TbStatus tb_problem_new(const struct TbExperiment *exp,
                             double m,
                             double sigma,
                             uint64_t data_seed,
                             struct TbProblem **out);

// Unnormalized log posterior at `u` (`-inf` outside the prior support).
//
// # Safety
// `problem` must be valid; `u` must hold `dim` values; `out` writable.
enum TbStatus tb_problem_log_posterior(const struct TbProblem *problem,
                                       const double *u,
                                       uintptr_t dim,
                                       double *out);

// Potential `Phi = misfit - offset` at `u`.
//
// # Safety
// `problem` must be valid; `u` must hold `dim` values; `out` writable.
enum TbStatus tb_problem_potential(const struct TbProblem *problem,
                                   const double *u,
                                   uintptr_t dim,
                                   double *out);

// Runs one Metropolis-Hastings chain from a prior draw and writes the
// post-burn-in samples row by row into `samples` (`capacity` values).
//
// # Safety
// `problem` must be valid; `proposal_std` holds `dim` values; `samples`
// holds `capacity` values; `count` and `acceptance` are writable.
enum TbStatus tb_problem_run_chain(const struct TbProblem *problem,
                                   uintptr_t iterations,
                                   double burn_in,
                                   const double *proposal_std,
                                   uintptr_t dim,
                                   uint64_t seed,
                                   double *samples,
                                   uintptr_t capacity,
                                   uintptr_t *count,
                                   double *acceptance);

// # Safety
// `problem` must be null or a handle not yet freed.
void tb_problem_free(struct TbProblem *problem);

// Hellinger distance between two posteriors from potentials on shared
// prior samples, with a bootstrap standard error.
//
// # Safety
// `phi1` and `phi2` must hold `n` values; outputs must be writable.
enum TbStatus tb_hellinger_estimate(const double *phi1,
                                    const double *phi2,
                                    uintptr_t n,
                                    uintptr_t bootstrap,
                                    uint64_t seed,
                                    double *d_h,
                                    double *se);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TUMOR_BAYES_H */
