#ifndef OPO_SIM_H
#define OPO_SIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpoStatus {
  OPO_STATUS_OK = 0,
  OPO_STATUS_NULL_POINTER = 1,
  OPO_STATUS_INVALID_PARAMETER = 2,
  OPO_STATUS_UNSUPPORTED = 3,
  OPO_STATUS_CONTRACT = 4,
  OPO_STATUS_CONFIG = 5,
  OPO_STATUS_DIVERGED = 6,
  OPO_STATUS_TRUNCATION = 7,
  OPO_STATUS_NO_CONVERGENCE = 8,
  OPO_STATUS_HERMITICITY = 9,
  OPO_STATUS_IO = 10,
  OPO_STATUS_UTF8 = 11,
  OPO_STATUS_PANIC = 12,
} OpoStatus;

typedef enum OpoColumn {
  OPO_COLUMN_TIME = 0,
  OPO_COLUMN_MEAN = 1,
  OPO_COLUMN_STDERR = 2,
  OPO_COLUMN_N_EFFECTIVE = 3,
  OPO_COLUMN_DIVERGED_FRACTION = 4,
} OpoColumn;

typedef enum OpoObservable {
  // ⟨α + α†⟩
  OPO_OBSERVABLE_XA = 0,
  // ⟨α†α⟩
  OPO_OBSERVABLE_NA = 1,
  // ⟨β + β†⟩
  OPO_OBSERVABLE_XB = 2,
} OpoObservable;

// Parsed run configuration.
typedef struct OpoConfig OpoConfig;

// Time series of the ensemble observables.
typedef struct OpoSeries OpoSeries;

// Seeded source of σ noise tuples.
typedef struct OpoSigmaSampler OpoSigmaSampler;

typedef struct OpoModel {
  double kappa;
  double gamma1;
  double gamma2;
  double epsilon_re;
  double epsilon_im;
} OpoModel;

// (α, α†, β, β†) as interleaved real/imaginary parts.
typedef struct OpoPhasePoint {
  double alpha_re;
  double alpha_im;
  double alpha_dag_re;
  double alpha_dag_im;
  double beta_re;
  double beta_im;
  double beta_dag_re;
  double beta_dag_im;
} OpoPhasePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next call into this library on the same thread.
const char *opo_last_error_message(void);

// Static version string.
const char *opo_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void opo_string_free(char *s);

// Checks the model parameters.
enum OpoStatus opo_model_validate(const struct OpoModel *model);

// ε_c = γ₁γ₂/κ
enum OpoStatus opo_critical_pump(const struct OpoModel *model, double *out);

// Semiclassical steady state; `branch` > 0 selects α > 0, < 0 the mirror
// image. Below threshold both give the trivial solution.
enum OpoStatus opo_steady_state(const struct OpoModel *model,
                                int branch,
                                struct OpoPhasePoint *out);

// Sampler with the closed-form optimal parameters for (κ, χ), drawing from
// stream `stream_id` of `seed`.
enum OpoStatus opo_sigma_sampler_new(double kappa,
                                     double chi,
                                     uint64_t seed,
                                     uint64_t stream_id,
                                     struct OpoSigmaSampler **out);

// Draws one (σ₁, σ₁†, σ₂, σ₂†) tuple into `out[0..8]` as re/im pairs.
//
// # Safety
// `out` must point to at least 8 writable doubles.
enum OpoStatus opo_sigma_sampler_draw(struct OpoSigmaSampler *sampler, double *out);

// # Safety
// `sampler` must be null or come from [`opo_sigma_sampler_new`].
void opo_sigma_sampler_free(struct OpoSigmaSampler *sampler);

// Parses a TOML configuration and applies `n_overrides` strings of the
// form `section.key=value`. `overrides` may be null when `n_overrides` is 0.
//
// # Safety
// `toml` must be a NUL-terminated string; `overrides` must point to
// `n_overrides` NUL-terminated strings.
enum OpoStatus opo_config_from_toml(const char *toml,
                                    const char *const *overrides,
                                    size_t n_overrides,
                                    struct OpoConfig **out);

// # Safety
// `cfg` must be null or come from [`opo_config_from_toml`].
void opo_config_free(struct OpoConfig *cfg);

// Runs the configured trajectory ensemble. A run in which every
// trajectory diverged still yields its partial series
// (see [`opo_series_truncated`]).
enum OpoStatus opo_simulate(const struct OpoConfig *cfg, struct OpoSeries **out);

// Master-equation reference on the configured output grid.
enum OpoStatus opo_oracle(const struct OpoConfig *cfg, struct OpoSeries **out);

// Parses a series CSV.
//
// # Safety
// `csv` must be a NUL-terminated string.
enum OpoStatus opo_series_from_csv(const char *csv, struct OpoSeries **out);

// Renders a series as CSV; release the result with [`opo_string_free`].
enum OpoStatus opo_series_to_csv(const struct OpoSeries *series, char **out);

// Number of grid points; 0 for null.
//
// # Safety
// `series` must be null or a live handle.
size_t opo_series_len(const struct OpoSeries *series);

// 1 when every trajectory diverged before the end of the grid.
//
// # Safety
// `series` must be null or a live handle.
int opo_series_truncated(const struct OpoSeries *series);

// Copies one column into `buf` (capacity `len`, at least the series
// length). `observable` selects the quantity for `Mean` and `Stderr`.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum OpoStatus opo_series_copy(const struct OpoSeries *series,
                               enum OpoColumn column,
                               enum OpoObservable observable,
                               double *buf,
                               size_t len);

// max_t |a − b|/√(se_a² + se_b²) and the time where it occurs.
enum OpoStatus opo_compare_series(const struct OpoSeries *a,
                                  const struct OpoSeries *b,
                                  enum OpoObservable observable,
                                  double *max_deviation,
                                  double *t_at_max);

// # Safety
// `series` must be null or a handle produced by this library.
void opo_series_free(struct OpoSeries *series);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPO_SIM_H */
