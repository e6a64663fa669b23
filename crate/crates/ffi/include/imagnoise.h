#ifndef IMAGNOISE_H
#define IMAGNOISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  IMN_STATUS_OK = 0,
  IMN_STATUS_NULL_POINTER = 1,
  IMN_STATUS_INVALID_ARGUMENT = 2,
  IMN_STATUS_DOMAIN = 3,
  IMN_STATUS_TRUNCATION = 4,
  IMN_STATUS_INTEGRATION = 5,
  IMN_STATUS_INSUFFICIENT_ENSEMBLE = 6,
  IMN_STATUS_PROXIMITY = 7,
  IMN_STATUS_DIVERGENCE = 8,
  IMN_STATUS_RANGE = 9,
  IMN_STATUS_RESOLUTION = 10,
  IMN_STATUS_ALIGNMENT = 11,
  IMN_STATUS_BUFFER_TOO_SMALL = 12,
  IMN_STATUS_PANIC = 13,
} ImnStatus;

/**
 * Closed-form generating function evaluated by [`imn_genfunc_closed`].
 */
typedef enum {
  /**
   * `A -> 0` at rate `rate`.
   */
  IMN_CLOSED_FORM_PURE_DEATH = 0,
  /**
   * `A -> 0`, `0 -> A`, `A -> 2A` all at rate `rate`.
   */
  IMN_CLOSED_FORM_TRIPLET_EQUAL = 1,
  /**
   * `A -> 0` and `A -> 2A` at `2 rate`, `0 -> A` at `rate`.
   */
  IMN_CLOSED_FORM_TRIPLET_TWO_BETA = 2,
} ImnClosedForm;

typedef enum {
  IMN_SCHEME_TAMED_EULER = 0,
  IMN_SCHEME_RECIPROCAL_EXACT = 1,
} ImnScheme;

/**
 * Opaque probability distribution over counts `0..=n_max`.
 */
typedef struct ImnDistribution ImnDistribution;

/**
 * Opaque ensemble of complex SDE endpoints.
 */
typedef struct ImnEnsemble ImnEnsemble;

/**
 * Opaque reaction specification.
 */
typedef struct ImnSpec ImnSpec;

/**
 * Channel `j A -> l A` with rate constant `rate`.
 */
typedef struct {
  uint32_t j;
  uint32_t l;
  double rate;
} ImnChannel;

typedef struct {
  double re;
  double im;
} ImnComplex;

typedef struct {
  double lower;
  /**
   * `+inf` past the blow-up floor.
   */
  double upper;
  double blowup_floor;
} ImnModulusBounds;

typedef struct {
  double dt;
  size_t n_paths;
  uint64_t seed;
  double blowup_threshold;
} ImnSdeConfig;

typedef struct {
  ImnComplex value;
  double stderr_re;
  double stderr_im;
} ImnCauchyEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *imn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *imn_version(void);

/**
 * # Safety
 * `channels` must point to `n` readable entries; `out` must be writable.
 */
ImnStatus imn_spec_new(const ImnChannel *channels, size_t n, ImnSpec **out);

/**
 * # Safety
 * `spec` must be NULL or a handle from [`imn_spec_new`] not yet freed.
 */
void imn_spec_free(ImnSpec *spec);

/**
 * # Safety
 * `out` must be writable.
 */
ImnStatus imn_distribution_point_mass(size_t n0, size_t n_max, ImnDistribution **out);

/**
 * Poisson(`mu`) truncated to `0..=n_max`; fails if the discarded tail exceeds `tail_tol`.
 *
 * # Safety
 * `out` must be writable.
 */
ImnStatus imn_distribution_poisson(double mu, size_t n_max, double tail_tol, ImnDistribution **out);

/**
 * # Safety
 * `probs` must point to `len` readable values; `out` must be writable.
 */
ImnStatus imn_distribution_from_probs(const double *probs, size_t len, ImnDistribution **out);

/**
 * Copies `P_0..P_n_max` (negative round-off clipped to 0).
 *
 * # Safety
 * `dist` must be a live handle; `buf` must hold `cap` values; `out_len` must be writable.
 */
ImnStatus imn_distribution_probs(const ImnDistribution *dist,
                                 double *buf,
                                 size_t cap,
                                 size_t *out_len);

/**
 * Time stamp of the distribution, or NaN for NULL.
 *
 * # Safety
 * `dist` must be NULL or a live handle.
 */
double imn_distribution_time(const ImnDistribution *dist);

/**
 * # Safety
 * `dist` must be NULL or a live handle.
 */
void imn_distribution_free(ImnDistribution *dist);

/**
 * Evolves `p0` under the master equation truncated at `n_max` to `t_end`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
ImnStatus imn_master_evolve(const ImnSpec *spec,
                            const ImnDistribution *p0,
                            size_t n_max,
                            double t_end,
                            double tol,
                            ImnDistribution **out);

/**
 * Empirical distribution of `n_paths` exact simulations at `t_end`.
 * Per-bin standard errors go to `stderr_buf` when it is not NULL.
 *
 * # Safety
 * Handles must be live; `out` must be writable; `stderr_buf`, if given, must hold `stderr_cap` values.
 */
ImnStatus imn_ssa(const ImnSpec *spec,
                  const ImnDistribution *p0,
                  double t_end,
                  size_t n_paths,
                  uint64_t seed,
                  ImnDistribution **out,
                  double *stderr_buf,
                  size_t stderr_cap,
                  size_t *stderr_len);

/**
 * Exact factorial moments `M_0..M_n0` at time `t` for `n0` particles under
 * `A + A -> 0` with rate `lambda`.
 *
 * # Safety
 * `buf` must hold `cap` values; `out_len` must be writable.
 */
ImnStatus imn_moments_closed(uint64_t n0,
                             double lambda,
                             double t,
                             double *buf,
                             size_t cap,
                             size_t *out_len);

/**
 * Moment system closed by `M_{m_max+1} = 0`, started from `m0[0..len]`.
 * Writes `M_0..M_m_max` and the closure diagnostic `|M_m_max(t)|`.
 *
 * # Safety
 * `m0` must hold `len` values; `buf` must hold `cap`; `out_len` and `closure` must be writable.
 */
ImnStatus imn_moments_truncated(const double *m0,
                                size_t len,
                                double lambda,
                                size_t m_max,
                                double t,
                                double tol,
                                double *buf,
                                size_t cap,
                                size_t *out_len,
                                double *closure);

/**
 * `G(x, t)` for initial generating polynomial `g0[0..len]`.
 *
 * # Safety
 * `g0` must hold `len` values; `out` must be writable.
 */
ImnStatus imn_genfunc_closed(ImnClosedForm form,
                             const double *g0,
                             size_t len,
                             double rate,
                             double t,
                             double x,
                             double *out);

/**
 * Comb coefficients `c_0..c_{2 k0}` of the explicit amplitude for `2 k0` particles.
 *
 * # Safety
 * `buf` must hold `cap` values; `out_len` must be writable.
 */
ImnStatus imn_appendix_c_comb(uint32_t k0,
                              double lambda,
                              double t,
                              double *buf,
                              size_t cap,
                              size_t *out_len);

/**
 * `E[1/phi(t)] = 1 + (xi0 - 1) e^{-t}` in rescaled time.
 */
ImnComplex imn_expected_reciprocal(ImnComplex xi0, double t);

/**
 * Bounds on `|phi(t* + delta_t)|` given `|phi(t*)| = modulus`.
 */
ImnModulusBounds imn_modulus_bounds(double modulus, double delta_t);

/**
 * Defaults: `dt = 1e-3`, 10000 paths, seed 0, blow-up threshold `1e6`.
 */
ImnSdeConfig imn_sde_config_default(void);

/**
 * Simulates `dphi = -phi^2 dtau + i phi dW` from `phi0` to rescaled time `tau`.
 *
 * # Safety
 * `out` must be writable.
 */
ImnStatus imn_sde_simulate(ImnScheme scheme,
                           ImnComplex phi0,
                           ImnSdeConfig config,
                           double tau,
                           ImnEnsemble **out);

/**
 * Number of paths, including flagged ones; 0 for NULL.
 *
 * # Safety
 * `ens` must be NULL or a live handle.
 */
size_t imn_ensemble_len(const ImnEnsemble *ens);

/**
 * Number of paths flagged as blown up; 0 for NULL.
 *
 * # Safety
 * `ens` must be NULL or a live handle.
 */
size_t imn_ensemble_flagged(const ImnEnsemble *ens);

/**
 * Copies the endpoints; flagged paths keep their last finite value.
 *
 * # Safety
 * `ens` must be live; `buf` must hold `cap` entries; `out_len` must be writable.
 */
ImnStatus imn_ensemble_points(const ImnEnsemble *ens, ImnComplex *buf, size_t cap, size_t *out_len);

/**
 * # Safety
 * `ens` must be NULL or a live handle.
 */
void imn_ensemble_free(ImnEnsemble *ens);

/**
 * Monte-Carlo Cauchy transform `(1/2 pi i) E[1/(z - phi)]` over the ensemble.
 *
 * # Safety
 * `ens` must be live; `out` must be writable.
 */
ImnStatus imn_mc_cauchy(const ImnEnsemble *ens, ImnComplex phi, ImnCauchyEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMAGNOISE_H */
