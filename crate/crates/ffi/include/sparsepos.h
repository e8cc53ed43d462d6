#ifndef SPARSEPOS_H
#define SPARSEPOS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Termination status of a solve.
 */
typedef enum SpsSolveStatus {
  SPS_SOLVE_STATUS_OPTIMAL = 0,
  SPS_SOLVE_STATUS_INFEASIBLE = 1,
  SPS_SOLVE_STATUS_UNBOUNDED = 2,
  SPS_SOLVE_STATUS_MAX_ITERATIONS = 3,
  SPS_SOLVE_STATUS_NUMERICAL_FAILURE = 4,
  /**
   * The handle was null.
   */
  SPS_SOLVE_STATUS_UNKNOWN = 5,
} SpsSolveStatus;

/**
 * Result codes of the C interface.
 */
typedef enum SpsStatus {
  SPS_STATUS_OK = 0,
  SPS_STATUS_NULL_POINTER = 1,
  SPS_STATUS_UTF8 = 2,
  SPS_STATUS_PARSE = 3,
  SPS_STATUS_ORDER = 4,
  SPS_STATUS_SOLVER = 5,
  SPS_STATUS_ARGUMENT = 6,
  SPS_STATUS_CERTIFICATE = 7,
  SPS_STATUS_PANIC = 8,
} SpsStatus;

/**
 * Opaque parsed problem.
 */
typedef struct SpsProblem SpsProblem;

/**
 * Opaque result of one solve at one relaxation order.
 */
typedef struct SpsResult SpsResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty when none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sps_last_error(void);

/**
 * Parses a problem in the text format accepted by the command line tool.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpsStatus sps_problem_parse(const char *source, struct SpsProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`sps_problem_parse`] not yet freed.
 */
void sps_problem_free(struct SpsProblem *problem);

/**
 * Total number of variables, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t sps_problem_nvars(const struct SpsProblem *problem);

/**
 * Divides every constraint by its bound (`g` constraints first) so that
 * `0 <= g <= 1` on the feasible set, in place.
 *
 * # Safety
 * `problem` must be a live handle and `bounds` point to `count` doubles.
 */
enum SpsStatus sps_problem_normalize_krivine(struct SpsProblem *problem,
                                             const double *bounds,
                                             size_t count);

/**
 * Solves one relaxation order of `variant` (for example `"schmudgen-sparse"`).
 * A non-optimal termination still yields a result; inspect its status.
 *
 * # Safety
 * `problem` must be a live handle, `variant` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum SpsStatus sps_solve(const struct SpsProblem *problem,
                         const char *variant,
                         uint32_t order,
                         double tol,
                         struct SpsResult **out);

/**
 * # Safety
 * `result` must be null or a handle from [`sps_solve`] not yet freed.
 */
void sps_result_free(struct SpsResult *result);

/**
 * Lower bound of the solve; `-inf` when unbounded, NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double sps_result_bound(const struct SpsResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
enum SpsSolveStatus sps_result_status(const struct SpsResult *result);

/**
 * Writes the certificate as a newly allocated JSON string; release it with
 * [`sps_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum SpsStatus sps_result_certificate_json(const struct SpsResult *result, char **out);

/**
 * Verifies the certificate against the solved instance. `residual` and
 * `passed` are optional outputs.
 *
 * # Safety
 * `result` must be a live handle; outputs must be null or valid pointers.
 */
enum SpsStatus sps_result_verify(const struct SpsResult *result,
                                 double tol,
                                 double *residual,
                                 bool *passed);

/**
 * Grid minimum of the objective over the feasible points of `[lo, hi]^n`.
 * `argmin` is optional and, when given, must hold `nvars` doubles.
 *
 * # Safety
 * `problem` must be a live handle; outputs must be null or valid pointers.
 */
enum SpsStatus sps_grid_min(const struct SpsProblem *problem,
                            double lo,
                            double hi,
                            double step,
                            double *minimum,
                            double *argmin);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void sps_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEPOS_H */
