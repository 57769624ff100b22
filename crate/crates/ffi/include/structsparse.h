#ifndef STRUCTSPARSE_H
#define STRUCTSPARSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_SHAPE = 3,
  SS_STATUS_EMPTY_CLASS = 4,
  SS_STATUS_ZERO_COLUMN = 5,
  SS_STATUS_NON_FINITE = 6,
  SS_STATUS_DECOMPOSITION = 7,
  SS_STATUS_STEP_FAILURE = 8,
  SS_STATUS_CYCLE = 9,
  SS_STATUS_CONFIG = 10,
  SS_STATUS_IO = 11,
  SS_STATUS_FORMAT = 12,
  SS_STATUS_PANIC = 13,
} SsStatus;

typedef enum SsPriorKind {
  SS_PRIOR_KIND_L1 = 0,
  SS_PRIOR_KIND_JOINT_SPARSITY = 1,
  SS_PRIOR_KIND_LAPLACIAN = 2,
  SS_PRIOR_KIND_GROUP = 3,
  SS_PRIOR_KIND_SPARSE_GROUP = 4,
  SS_PRIOR_KIND_LOW_RANK = 5,
  SS_PRIOR_KIND_LOW_RANK_GROUP = 6,
} SsPriorKind;

typedef enum SsSolverKind {
  SS_SOLVER_KIND_ADMM = 0,
  SS_SOLVER_KIND_SPARSA = 1,
  SS_SOLVER_KIND_FSS = 2,
} SsSolverKind;

/**
 * Opaque dictionary handle.
 */
typedef struct SsDictionary SsDictionary;

typedef struct SsSolverParams {
  double rho;
  size_t max_iters;
  double tol_abs;
  double tol_rel;
  double sparsa_eta;
  double sparsa_alpha0;
  bool adaptive_rho;
} SsSolverParams;

/**
 * Regularizer and its weights. `lambda2` is read only by the Laplacian and
 * sparse-group priors.
 */
typedef struct SsPrior {
  enum SsPriorKind kind;
  double lambda;
  double lambda2;
  /**
   * Sparse-group prior: scale the ℓ1 term of each group by its weight.
   */
  bool weighted_l1;
} SsPrior;

typedef struct SsReport {
  size_t iterations;
  bool converged;
  /**
   * Objective at the returned point.
   */
  double objective;
} SsReport;

typedef struct SsMetrics {
  double overall_accuracy;
  double average_accuracy;
  double kappa;
} SsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ss_last_error(void);

/**
 * Library defaults: ρ = 1, 2000 iterations, tolerances 1e-6 / 1e-4.
 */
struct SsSolverParams ss_solver_params_default(void);

/**
 * Tight tolerances with adaptive ρ, for reference solutions.
 */
struct SsSolverParams ss_solver_params_precise(void);

/**
 * Builds a dictionary from `bands × n_atoms` column-major atoms and one
 * class id (1-based, grouped contiguously) per atom.
 *
 * # Safety
 * `atoms` must hold `bands * n_atoms` doubles, `classes` `n_atoms` values,
 * and `out` must be writable.
 */
enum SsStatus ss_dictionary_new(const double *atoms,
                                size_t bands,
                                size_t n_atoms,
                                const uint16_t *classes,
                                bool normalize,
                                struct SsDictionary **out);

/**
 * Releases a dictionary; null is ignored.
 *
 * # Safety
 * `dict` must come from [`ss_dictionary_new`] and not be used afterwards.
 */
void ss_dictionary_free(struct SsDictionary *dict);

/**
 * Number of atoms, 0 for null.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t ss_dictionary_num_atoms(const struct SsDictionary *dict);

/**
 * Number of classes, 0 for null.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t ss_dictionary_num_classes(const struct SsDictionary *dict);

/**
 * Proximal operator of `scale · R` on a `rows × cols` matrix whose rows are
 * partitioned into `n_groups` contiguous groups (weights `√size`).
 *
 * # Safety
 * `v` and `out` must hold `rows * cols` doubles and `group_sizes` `n_groups`
 * values summing to `rows`.
 */
enum SsStatus ss_prox(const struct SsPrior *prior,
                      const size_t *group_sizes,
                      size_t n_groups,
                      const double *v,
                      size_t rows,
                      size_t cols,
                      double scale,
                      double *out);

/**
 * Minimizes `½‖Y − AX‖²_F + R(X)` for `bands × pixels` data `y` and writes
 * the `n_atoms × pixels` coefficients to `x_out`.
 *
 * The Laplacian prior needs `weights`, a symmetric `pixels × pixels`
 * similarity matrix with zero diagonal; it is ignored otherwise and may be
 * null. `params` may be null for the defaults, `report` may be null.
 *
 * # Safety
 * Pointers must be valid for the sizes above; `dict` must be a live handle.
 */
enum SsStatus ss_solve(const struct SsDictionary *dict,
                       const struct SsPrior *prior,
                       enum SsSolverKind solver,
                       const struct SsSolverParams *params,
                       const double *y,
                       size_t bands,
                       size_t pixels,
                       const double *weights,
                       double *x_out,
                       struct SsReport *report);

/**
 * Codes a block of `pixels` spectra (column 0 is the pixel being labeled)
 * and writes its class. For the Laplacian prior the pixel graph uses a
 * Gaussian kernel of width `kernel_sigma`. `residuals`, if not null,
 * receives one class residual per dictionary class.
 *
 * # Safety
 * Pointers must be valid for the sizes above; `dict` must be a live handle.
 */
enum SsStatus ss_classify_block(const struct SsDictionary *dict,
                                const struct SsPrior *prior,
                                enum SsSolverKind solver,
                                const struct SsSolverParams *params,
                                double kernel_sigma,
                                const double *spectra,
                                size_t bands,
                                size_t pixels,
                                uint16_t *class_out,
                                double *residuals);

/**
 * OA, AA (percent) and κ of a `k × k` row-major confusion matrix whose
 * entry `[t][p]` counts pixels of true class `t + 1` predicted `p + 1`.
 *
 * # Safety
 * `counts` must hold `k * k` values and `out` must be writable.
 */
enum SsStatus ss_metrics(const uint64_t *counts, size_t k, struct SsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRUCTSPARSE_H */
