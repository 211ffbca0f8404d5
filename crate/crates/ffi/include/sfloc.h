#ifndef SFLOC_H
#define SFLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SflocStatus {
  SFLOC_STATUS_OK = 0,
  SFLOC_STATUS_NULL_POINTER = 1,
  SFLOC_STATUS_INVALID_PARAMETER = 2,
  SFLOC_STATUS_NON_POSITIVE_SEPARATION = 3,
  SFLOC_STATUS_GAMMA_POLE = 4,
  SFLOC_STATUS_INDEX_OUT_OF_RANGE = 5,
  SFLOC_STATUS_ORACLE_CAP_EXCEEDED = 6,
  SFLOC_STATUS_SINGULAR_SYSTEM = 7,
  SFLOC_STATUS_NUMERICAL = 8,
  SFLOC_STATUS_NO_DIP = 9,
  SFLOC_STATUS_DIP_COUNT = 10,
  SFLOC_STATUS_PANIC = 11,
} SflocStatus;

// Single-pass candidate intervals.
typedef struct SflocCandidates SflocCandidates;

// Analytic intensity model for one parameter set.
typedef struct SflocModel SflocModel;

// Ensemble parameters; rates share the units of `gamma`.
typedef struct SflocParams {
  uint32_t n_atoms;
  uint32_t n_photons;
  double gamma;
  double rabi;
  double detuning;
  double dipole_shift;
} SflocParams;

typedef struct SflocDipFeature {
  double center;
  double width;
  double depth;
  double plateau;
  double minimum;
  double slope_max;
} SflocDipFeature;

typedef struct SflocPairCoefficients {
  double chi;
  double omega;
  double chi_expanded;
  double omega_expanded;
  double static_dd;
  double averaged_dd;
} SflocPairCoefficients;

typedef struct SflocPositionEstimate {
  double kx_hat;
  double uncertainty;
  double width;
} SflocPositionEstimate;

typedef struct SflocInterval {
  double kx_low;
  double kx_high;
  double local_slope;
} SflocInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parameters with `gamma = 1` and a single-photon drive.
struct SflocParams sfloc_params_default(uint32_t n_atoms,
                                        double rabi,
                                        double detuning,
                                        double dipole_shift);

// Copies the calling thread's last error message, NUL-terminated and
// truncated to `len` bytes. Returns the full message length plus one.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t sfloc_last_error_message(char *buf, size_t len);

// Static, NUL-terminated library version.
const char *sfloc_version(void);

// # Safety
// `params` must point to a valid `SflocParams`; `out` to writable storage.
enum SflocStatus sfloc_model_new(const struct SflocParams *params, struct SflocModel **out);

// # Safety
// `model` must be null or a handle from `sfloc_model_new`, freed once.
void sfloc_model_free(struct SflocModel *model);

// `⟨S⁺S⁻⟩` at standing-wave phase `kx`.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum SflocStatus sfloc_model_intensity(const struct SflocModel *model, double kx, double *out);

// Samples `grid_points` phases over one field period.
//
// # Safety
// `kx_out` and `values_out` must each hold `grid_points` doubles.
enum SflocStatus sfloc_model_profile(const struct SflocModel *model,
                                     size_t grid_points,
                                     double *kx_out,
                                     double *values_out);

// # Safety
// `model` must be a live handle; `out` writable.
enum SflocStatus sfloc_model_dip_feature(const struct SflocModel *model,
                                         size_t grid_points,
                                         struct SflocDipFeature *out);

// Intensity from the dense steady state; limited to small ensembles.
//
// # Safety
// `params` must be valid; `out` writable.
enum SflocStatus sfloc_oracle_intensity(const struct SflocParams *params, double kx, double *out);

// # Safety
// `out` must be writable.
enum SflocStatus sfloc_pair_coefficients(double kr,
                                         double xi,
                                         double gamma,
                                         struct SflocPairCoefficients *out);

// Synthesizes a scan of one ensemble at `true_kx` over `points` phase
// offsets and estimates its position.
//
// # Safety
// `params` must be valid; `out` writable.
enum SflocStatus sfloc_scan_estimate(const struct SflocParams *params,
                                     double true_kx,
                                     size_t points,
                                     double noise_sigma,
                                     uint64_t seed,
                                     struct SflocPositionEstimate *out);

// Candidate positions in `[0, π/n]` for a reading `intensity ± sigma`.
//
// # Safety
// `model` must be a live handle; `out` writable.
enum SflocStatus sfloc_candidates_new(const struct SflocModel *model,
                                      size_t grid_points,
                                      double intensity,
                                      double sigma,
                                      struct SflocCandidates **out);

// Number of intervals; 0 for a null handle.
//
// # Safety
// `c` must be null or a live handle.
size_t sfloc_candidates_len(const struct SflocCandidates *c);

// # Safety
// `c` must be a live handle; `out` writable.
enum SflocStatus sfloc_candidates_get(const struct SflocCandidates *c,
                                      size_t index,
                                      struct SflocInterval *out);

// # Safety
// `c` must be null or a handle from `sfloc_candidates_new`, freed once.
void sfloc_candidates_free(struct SflocCandidates *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFLOC_H */
