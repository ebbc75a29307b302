#ifndef EKIGL_H
#define EKIGL_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EkiglStatus {
  EKIGL_STATUS_OK = 0,
  EKIGL_STATUS_NULL_POINTER = 1,
  EKIGL_STATUS_INVALID_ARGUMENT = 2,
  EKIGL_STATUS_DIMENSION_MISMATCH = 3,
  EKIGL_STATUS_NUMERICAL = 4,
  EKIGL_STATUS_SIMULATION = 5,
  EKIGL_STATUS_CONFIG = 6,
  EKIGL_STATUS_BUFFER_TOO_SMALL = 7,
  EKIGL_STATUS_PANIC = 8,
} EkiglStatus;

// Inverse-temperature stopping rule for `ekigl_run_eki`.
typedef enum EkiglEkiMode {
  EKIGL_EKI_MODE_SAMPLING = 0,
  EKIGL_EKI_MODE_OPTIMISATION = 1,
} EkiglEkiMode;

// Opaque simulator model.
typedef struct EkiglModel EkiglModel;

// Opaque output of a run.
typedef struct EkiglResult EkiglResult;

typedef struct EkiglEkiOptions {
  size_t n_particles;
  double rho;
  double upsilon;
  double lambda_max;
  size_t max_iters;
  double bisect_tol;
  enum EkiglEkiMode mode;
} EkiglEkiOptions;

// ABC-SMC settings; `NaN` in `rw_scale` or `initial_kappa` selects the default.
typedef struct EkiglAbcSmcOptions {
  size_t n_particles;
  double ess_kappa_target;
  double resample_threshold;
  double stop_acceptance;
  double rw_scale;
  double initial_kappa;
  size_t max_iters;
} EkiglAbcSmcOptions;

// ABC-MCMC settings; `NaN` in `initial_kappa` selects the default and
// `n_keep = 0` keeps every post-burn-in state.
typedef struct EkiglAbcMcmcOptions {
  size_t n_steps;
  double target_acceptance;
  double gain_exponent;
  double initial_kappa;
  double proposal_scale;
  size_t adapt_start;
  double burn_in;
  size_t n_keep;
} EkiglAbcMcmcOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *ekigl_last_error_message(void);

// Library version as a static nul-terminated string.
const char *ekigl_version(void);

// Builds a registered model (`"gk"`, `"l96"`, `"lingauss"`). `overrides_toml`
// may be null or a TOML document of model parameters.
//
// # Safety
// `name` and `overrides_toml` must be null or valid nul-terminated strings;
// `out` must be a valid pointer.
enum EkiglStatus ekigl_model_new(const char *name,
                                 const char *overrides_toml,
                                 struct EkiglModel **out);

// # Safety
// `model` must be null or a handle from `ekigl_model_new` not yet freed.
void ekigl_model_free(struct EkiglModel *model);

// Parameter dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ekigl_model_dim_x(const struct EkiglModel *model);

// Data dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ekigl_model_dim_y(const struct EkiglModel *model);

// Draws `count` prior particles into `out` (`count × dim_x`, row-major).
//
// # Safety
// `model` must be a live handle and `out` must hold `out_len` doubles.
enum EkiglStatus ekigl_model_sample_prior(const struct EkiglModel *model,
                                          size_t count,
                                          uint64_t seed,
                                          double *out,
                                          size_t out_len);

// One likelihood simulation at working-space parameters `x`.
//
// # Safety
// `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
enum EkiglStatus ekigl_model_simulate(const struct EkiglModel *model,
                                      const double *x,
                                      size_t x_len,
                                      uint64_t seed,
                                      double *out,
                                      size_t out_len);

// Maps working-space parameters to the model's natural parameterisation.
//
// # Safety
// `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
enum EkiglStatus ekigl_model_to_natural(const struct EkiglModel *model,
                                        const double *x,
                                        size_t x_len,
                                        double *out,
                                        size_t out_len);

struct EkiglEkiOptions ekigl_eki_options_default(void);

struct EkiglAbcSmcOptions ekigl_abc_smc_options_default(void);

struct EkiglAbcMcmcOptions ekigl_abc_mcmc_options_default(void);

// Runs ensemble Kalman inversion. A null `options` uses the defaults.
//
// # Safety
// Pointers must be valid; `observed` must hold `observed_len` doubles.
enum EkiglStatus ekigl_run_eki(const struct EkiglModel *model,
                               const double *observed,
                               size_t observed_len,
                               const struct EkiglEkiOptions *options,
                               uint64_t seed,
                               struct EkiglResult **out);

// Runs ABC-SMC. A null `options` uses the defaults.
//
// # Safety
// Pointers must be valid; `observed` must hold `observed_len` doubles.
enum EkiglStatus ekigl_run_abc_smc(const struct EkiglModel *model,
                                   const double *observed,
                                   size_t observed_len,
                                   const struct EkiglAbcSmcOptions *options,
                                   uint64_t seed,
                                   struct EkiglResult **out);

// Runs ABC-MCMC. A null `options` uses the defaults.
//
// # Safety
// Pointers must be valid; `observed` must hold `observed_len` doubles.
enum EkiglStatus ekigl_run_abc_mcmc(const struct EkiglModel *model,
                                    const double *observed,
                                    size_t observed_len,
                                    const struct EkiglAbcMcmcOptions *options,
                                    uint64_t seed,
                                    struct EkiglResult **out);

// # Safety
// `result` must be null or a handle from one of the run functions not yet freed.
void ekigl_result_free(struct EkiglResult *result);

// Number of particles in the final ensemble, or 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t ekigl_result_n_particles(const struct EkiglResult *result);

// # Safety
// `result` must be null or a live handle.
size_t ekigl_result_dim_x(const struct EkiglResult *result);

// Simulations consumed, or 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
uint64_t ekigl_result_sim_count(const struct EkiglResult *result);

// Final inverse temperature (EKI) or tolerance (ABC); `NaN` for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double ekigl_result_final_value(const struct EkiglResult *result);

// Overall acceptance rate of ABC runs; `NaN` for EKI or a null handle.
//
// # Safety
// `result` must be null or a live handle.
double ekigl_result_acceptance_rate(const struct EkiglResult *result);

// Termination reason as a static string, or null for a null handle.
//
// # Safety
// `result` must be null or a live handle.
const char *ekigl_result_termination(const struct EkiglResult *result);

// Final ensemble in working space, `n × dim_x` row-major.
//
// # Safety
// `out` must hold `out_len` doubles.
enum EkiglStatus ekigl_result_params(const struct EkiglResult *result, double *out, size_t out_len);

// Number of schedule entries.
//
// # Safety
// `result` must be null or a live handle.
size_t ekigl_result_schedule_len(const struct EkiglResult *result);

// Realized temperatures (EKI) or tolerances (ABC), in order.
//
// # Safety
// `out` must hold `out_len` doubles.
enum EkiglStatus ekigl_result_schedule(const struct EkiglResult *result,
                                       double *out,
                                       size_t out_len);

// g-and-k quantile at `u ∈ (0, 1)` with the conventional `c = 0.8`.
//
// # Safety
// `out` must be a valid pointer.
enum EkiglStatus ekigl_gk_quantile(double u, double a, double b, double g, double k, double *out);

// Posterior of `x ~ N(m, P)`, `y | x ~ N(Hx, R)`. All matrices row-major:
// `prior_cov` and `post_cov` are `d_x × d_x`, `h` is `d_y × d_x`, `r` is `d_y × d_y`.
//
// # Safety
// Every pointer must hold the number of doubles implied by `d_x` and `d_y`.
enum EkiglStatus ekigl_linear_gaussian_posterior(size_t d_x,
                                                 size_t d_y,
                                                 const double *prior_mean,
                                                 const double *prior_cov,
                                                 const double *h,
                                                 const double *r,
                                                 const double *y,
                                                 double *post_mean,
                                                 double *post_cov);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EKIGL_H */
