#ifndef IRS_PARAFAC_H
#define IRS_PARAFAC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  IRS_STATUS_OK = 0,
  IRS_STATUS_NULL_POINTER = 1,
  IRS_STATUS_INVALID_ARGUMENT = 2,
  IRS_STATUS_SHAPE_MISMATCH = 3,
  IRS_STATUS_INFEASIBLE_DESIGN = 4,
  IRS_STATUS_RANK_DEFICIENT = 5,
  IRS_STATUS_NUMERICAL_FAILURE = 6,
  IRS_STATUS_BUFFER_TOO_SMALL = 7,
  IRS_STATUS_PANIC = 99,
} IrsStatus;

/**
 * Estimator selector for [`irs_estimate`].
 */
typedef enum {
  IRS_ESTIMATOR_LS = 0,
  IRS_ESTIMATOR_KRF = 1,
  IRS_ESTIMATOR_BALS = 2,
  IRS_ESTIMATOR_BALS_ORTHOGONAL = 3,
  IRS_ESTIMATOR_TALS = 4,
} IrsEstimator;

/**
 * Opaque estimator output.
 */
typedef struct IrsEstimate IrsEstimate;

/**
 * Opaque simulated scenario.
 */
typedef struct IrsScenario IrsScenario;

/**
 * System dimensions: `m` BS antennas, `l` UT antennas, `n` IRS elements,
 * `k` blocks, `t` slots per block.
 */
typedef struct {
  size_t m;
  size_t l;
  size_t n;
  size_t k;
  size_t t;
} IrsDims;

/**
 * One complex double, layout-compatible with `double _Complex`.
 */
typedef struct {
  double re;
  double im;
} IrsComplex;

/**
 * Trace bounds for the composite channel.
 */
typedef struct {
  double trace_bound;
  double real_trace;
  double imag_trace;
} IrsCrb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the last failed call on this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length
 * excluding the terminator, or 0 when there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t irs_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *irs_version(void);

/**
 * Simulates an i.i.d. Rayleigh scenario. `snr_db` may be `INFINITY` for a
 * noiseless tensor. With `random_designs` nonzero, random-phase IRS and
 * pilot matrices replace the DFT designs.
 *
 * # Safety
 * `out` must be a valid pointer; the handle written there must be released
 * with [`irs_scenario_free`].
 */
IrsStatus irs_scenario_new(IrsDims dims,
                           double snr_db,
                           bool random_designs,
                           uint64_t seed,
                           IrsScenario **out);

/**
 * # Safety
 * `sc` must be null or a handle from [`irs_scenario_new`] not yet freed.
 */
void irs_scenario_free(IrsScenario *sc);

/**
 * # Safety
 * `sc` and `out` must be valid.
 */
IrsStatus irs_scenario_dims(const IrsScenario *sc, IrsDims *out);

/**
 * Realized per-entry noise variance.
 *
 * # Safety
 * `sc` and `out` must be valid.
 */
IrsStatus irs_scenario_sigma2(const IrsScenario *sc, double *out);

/**
 * True composite channel, `M*L*N` entries.
 *
 * # Safety
 * `sc` must be valid and `out` valid for `capacity` entries.
 */
IrsStatus irs_scenario_theta(const IrsScenario *sc, IrsComplex *out, size_t capacity);

/**
 * Received tensor, `L*T*K` entries.
 *
 * # Safety
 * `sc` must be valid and `out` valid for `capacity` entries.
 */
IrsStatus irs_scenario_tensor(const IrsScenario *sc, IrsComplex *out, size_t capacity);

/**
 * IRS phase matrix `K x N` known to the receiver.
 *
 * # Safety
 * `sc` must be valid and `out` valid for `capacity` entries.
 */
IrsStatus irs_scenario_irs_matrix(const IrsScenario *sc, IrsComplex *out, size_t capacity);

/**
 * Pilot matrix `T x M`.
 *
 * # Safety
 * `sc` must be valid and `out` valid for `capacity` entries.
 */
IrsStatus irs_scenario_pilots(const IrsScenario *sc, IrsComplex *out, size_t capacity);

/**
 * Runs an estimator on a simulated scenario. `seed` drives the random
 * initialization of the alternating estimators.
 *
 * # Safety
 * `sc` and `out` must be valid; release the result with [`irs_estimate_free`].
 */
IrsStatus irs_estimate(const IrsScenario *sc, IrsEstimator kind, uint64_t seed, IrsEstimate **out);

/**
 * Runs an estimator on caller data: `y` holds `L*T*K` entries, `irs` the
 * `K x N` IRS matrix and `pilots` the `T x M` pilot matrix.
 *
 * # Safety
 * Every array must be valid for the length implied by `dims`; `out` must be
 * valid.
 */
IrsStatus irs_estimate_raw(IrsDims dims,
                           const IrsComplex *y,
                           const IrsComplex *irs,
                           const IrsComplex *pilots,
                           IrsEstimator kind,
                           uint64_t seed,
                           IrsEstimate **out);

/**
 * # Safety
 * `est` must be null or a handle from [`irs_estimate`] not yet freed.
 */
void irs_estimate_free(IrsEstimate *est);

/**
 * Estimated composite channel, `M*L*N` entries.
 *
 * # Safety
 * `est` must be valid and `out` valid for `capacity` entries.
 */
IrsStatus irs_estimate_theta(const IrsEstimate *est, IrsComplex *out, size_t capacity);

/**
 * Iteration count and convergence flag. Non-iterative estimators report
 * zero iterations.
 *
 * # Safety
 * All pointers must be valid.
 */
IrsStatus irs_estimate_iterations(const IrsEstimate *est, size_t *iterations, bool *converged);

/**
 * Normalized squared error of the composite estimate against the scenario.
 *
 * # Safety
 * All pointers must be valid.
 */
IrsStatus irs_estimate_nmse(const IrsEstimate *est, const IrsScenario *sc, double *out);

/**
 * Closed-form bound for orthogonal designs at noise variance `sigma2`.
 *
 * # Safety
 * `out` must be valid.
 */
IrsStatus irs_crb_closed_form(IrsDims dims, double sigma2, IrsCrb *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRS_PARAFAC_H */
