#ifndef CLEMO_H
#define CLEMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CLEMO_METHODS_DTR 1

#define CLEMO_METHODS_LR 2

#define CLEMO_METHODS_CLEMO 4

typedef enum ClemoStatus {
  CLEMO_STATUS_OK = 0,
  CLEMO_STATUS_NULL_POINTER = 1,
  CLEMO_STATUS_INVALID_ARGUMENT = 2,
  CLEMO_STATUS_BUFFER_TOO_SMALL = 3,
  CLEMO_STATUS_DIMENSION_MISMATCH = 4,
  CLEMO_STATUS_PRECONDITION = 5,
  CLEMO_STATUS_INFEASIBLE = 6,
  CLEMO_STATUS_ORACLE_REFUSED = 7,
  CLEMO_STATUS_SAMPLER_STARVATION = 8,
  CLEMO_STATUS_CONFIG = 9,
  CLEMO_STATUS_DATA = 10,
  CLEMO_STATUS_NON_FINITE_LOSS = 11,
  CLEMO_STATUS_IO = 12,
  CLEMO_STATUS_PARSE = 13,
  CLEMO_STATUS_PANIC = 14,
} ClemoStatus;

typedef enum ClemoMethod {
  CLEMO_METHOD_DTR = 0,
  CLEMO_METHOD_LR = 1,
  CLEMO_METHOD_CLEMO = 2,
} ClemoMethod;

typedef struct ClemoExplanation ClemoExplanation;

typedef struct ClemoModel ClemoModel;

typedef struct ClemoProblem ClemoProblem;

typedef struct ClemoExplainOptions {
  size_t samples;
  uint64_t seed;
  /**
   * Bitwise OR of `CLEMO_METHODS_*`.
   */
  uint32_t methods;
  size_t max_iter;
  double tol;
} ClemoExplainOptions;

typedef struct ClemoMetrics {
  double accuracy_objective;
  double accuracy_decisions;
  double incoherence_objective;
  double incoherence_feasibility;
} ClemoMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *clemo_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until
 * the next call into the library from the same thread.
 */
const char *clemo_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from a `*_to_json` call and not have been freed.
 */
void clemo_string_free(char *s);

struct ClemoExplainOptions clemo_explain_options_default(void);

/**
 * Parses an instance document (the CLI's `instance.json` format).
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be writable.
 */
enum ClemoStatus clemo_problem_from_json(const char *json, struct ClemoProblem **out);

/**
 * Generated knapsack with capacity 1; `kp_type` is 1 to 4.
 *
 * # Safety
 * `out` must be writable.
 */
enum ClemoStatus clemo_problem_generate_kp(uint8_t kp_type,
                                           size_t items,
                                           uint64_t seed,
                                           struct ClemoProblem **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum ClemoStatus clemo_problem_generate_cvrp(uint64_t seed, struct ClemoProblem **out);

/**
 * The shipped six-node shortest-path instance.
 *
 * # Safety
 * `out` must be writable.
 */
enum ClemoStatus clemo_problem_default_spp(struct ClemoProblem **out);

/**
 * # Safety
 * `p` must be NULL or a live handle.
 */
void clemo_problem_free(struct ClemoProblem *p);

/**
 * Number of parameters, or 0 for a NULL handle.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t clemo_problem_num_params(const struct ClemoProblem *p);

/**
 * Number of decision variables, or 0 for a NULL handle.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t clemo_problem_num_vars(const struct ClemoProblem *p);

/**
 * Copies the present parameter vector into `out`.
 *
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum ClemoStatus clemo_problem_nominal(const struct ClemoProblem *p, double *out, size_t out_len);

/**
 * Solves the problem at `theta`, writing the decision vector and objective value.
 *
 * # Safety
 * `theta` must hold `theta_len` doubles, `x_out` `x_len` doubles, and
 * `objective_out` must be writable.
 */
enum ClemoStatus clemo_problem_solve(const struct ClemoProblem *p,
                                     const double *theta,
                                     size_t theta_len,
                                     double *x_out,
                                     size_t x_len,
                                     double *objective_out);

/**
 * # Safety
 * `out` must be writable.
 */
enum ClemoStatus clemo_problem_to_json(const struct ClemoProblem *p, char **out);

/**
 * Samples around the present problem and fits the selected methods.
 * `opts` may be NULL for the defaults.
 *
 * # Safety
 * `p` must be a live handle, `opts` NULL or valid, `out` writable.
 */
enum ClemoStatus clemo_explain(const struct ClemoProblem *p,
                               const struct ClemoExplainOptions *opts,
                               struct ClemoExplanation **out);

/**
 * # Safety
 * `e` must be NULL or a live handle.
 */
void clemo_explanation_free(struct ClemoExplanation *e);

/**
 * Evaluation metrics of one fitted method.
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum ClemoStatus clemo_explanation_metrics(const struct ClemoExplanation *e,
                                           enum ClemoMethod method,
                                           struct ClemoMetrics *out);

/**
 * Loss weights (a1, a2, c1, c2) used by the CLEMO fit.
 *
 * # Safety
 * `out` must hold 4 doubles.
 */
enum ClemoStatus clemo_explanation_lambda(const struct ClemoExplanation *e, double *out);

/**
 * CLEMO loss trace. With `out_len` too small, `BufferTooSmall` is returned
 * and `needed` still receives the length.
 *
 * # Safety
 * `out` must hold `out_len` doubles and `needed` must be writable or NULL.
 */
enum ClemoStatus clemo_explanation_loss_trace(const struct ClemoExplanation *e,
                                              double *out,
                                              size_t out_len,
                                              size_t *needed);

/**
 * Copy of a fitted linear model (`Lr` or `Clemo`).
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum ClemoStatus clemo_explanation_model(const struct ClemoExplanation *e,
                                         enum ClemoMethod method,
                                         struct ClemoModel **out);

/**
 * # Safety
 * `m` must be NULL or a live handle.
 */
void clemo_model_free(struct ClemoModel *m);

/**
 * Rows of the coefficient matrix: the objective followed by explained variables.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t clemo_model_num_components(const struct ClemoModel *m);

/**
 * Columns of the coefficient matrix: intercept plus one per parameter.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t clemo_model_num_features(const struct ClemoModel *m);

/**
 * Row-major coefficients, `components × features`.
 *
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum ClemoStatus clemo_model_coefficients(const struct ClemoModel *m, double *out, size_t out_len);

/**
 * Predicted objective and explained variables at `theta`.
 *
 * # Safety
 * `theta` must hold `theta_len` doubles and `out` `out_len` doubles.
 */
enum ClemoStatus clemo_model_predict(const struct ClemoModel *m,
                                     const double *theta,
                                     size_t theta_len,
                                     double *out,
                                     size_t out_len);

/**
 * # Safety
 * `out` must be writable.
 */
enum ClemoStatus clemo_model_to_json(const struct ClemoModel *m, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLEMO_H */
