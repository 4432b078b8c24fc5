#ifndef STBEAT_H
#define STBEAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Negative values are errors.
typedef enum StbeatStatus {
  STBEAT_STATUS_OK = 0,
  // Analysis ran but no band was periodic; the handle is still returned.
  STBEAT_STATUS_ISOLATION_FAILURE = 1,
  STBEAT_STATUS_NULL_POINTER = -1,
  STBEAT_STATUS_INVALID_CONFIG = -2,
  STBEAT_STATUS_IO = -3,
  STBEAT_STATUS_DECODE = -4,
  STBEAT_STATUS_INSUFFICIENT_AUDIO = -5,
  STBEAT_STATUS_INVALID_INPUT = -6,
  STBEAT_STATUS_PANIC = -99,
} StbeatStatus;

// Opaque analysis result.
typedef struct StbeatAnalysis StbeatAnalysis;

// Analysis parameters. `band_rows = 0` derives K from the input length.
typedef struct StbeatConfig {
  uint32_t downsample;
  uint32_t band_rows;
  uint32_t bands;
  uint32_t min_peak_distance;
  uint32_t thresholds;
  double epsilon;
} StbeatConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default parameters: D = 40, K derived, Q = 10, n_p = 40, H = 100, epsilon = 1e-3.
struct StbeatConfig stbeat_config_default(void);

// Analyses `len` mono samples at `sample_rate` Hz. `cfg` may be null for
// defaults. On `Ok` or `IsolationFailure` a handle is written to `*out`.
//
// # Safety
// `samples` points to `len` readable doubles, `cfg` is null or valid, and
// `out` is a valid pointer.
enum StbeatStatus stbeat_analyze_samples(const double *samples,
                                         size_t len,
                                         double sample_rate,
                                         const struct StbeatConfig *cfg,
                                         struct StbeatAnalysis **out);

// Loads a WAV file (mono or stereo) and analyses it.
//
// # Safety
// `path` is a NUL-terminated string, `cfg` is null or valid, and `out` is a
// valid pointer.
enum StbeatStatus stbeat_analyze_file(const char *path,
                                      const struct StbeatConfig *cfg,
                                      struct StbeatAnalysis **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `analysis` is null or a handle not yet freed.
void stbeat_analysis_free(struct StbeatAnalysis *analysis);

// True when a tempo was estimated.
//
// # Safety
// `analysis` is null or a live handle.
bool stbeat_analysis_has_tempo(const struct StbeatAnalysis *analysis);

// Estimated tempo in BPM, or NaN.
//
// # Safety
// `analysis` is null or a live handle.
double stbeat_analysis_bpm(const struct StbeatAnalysis *analysis);

// 1-based index of the selected band, or 0.
//
// # Safety
// `analysis` is null or a live handle.
uint32_t stbeat_analysis_selected_band(const struct StbeatAnalysis *analysis);

// Regularity score of the selected band, or NaN.
//
// # Safety
// `analysis` is null or a live handle.
double stbeat_analysis_score(const struct StbeatAnalysis *analysis);

// Number of bands Q, or 0 for null.
//
// # Safety
// `analysis` is null or a live handle.
size_t stbeat_analysis_num_bands(const struct StbeatAnalysis *analysis);

// Score of 1-based `band`, or NaN when out of range.
//
// # Safety
// `analysis` is null or a live handle.
double stbeat_analysis_band_score(const struct StbeatAnalysis *analysis, size_t band);

// Sample rate after downsampling in Hz, or NaN.
//
// # Safety
// `analysis` is null or a live handle.
double stbeat_analysis_effective_rate(const struct StbeatAnalysis *analysis);

// Envelope length M, or 0.
//
// # Safety
// `analysis` is null or a live handle.
size_t stbeat_analysis_decimated_len(const struct StbeatAnalysis *analysis);

// Gap vector of the selected band in samples. Writes at most `cap` values
// to `buf` (which may be null) and returns the total count; 0 without a
// tempo.
//
// # Safety
// `analysis` is null or a live handle; `buf` is null or has `cap` slots.
size_t stbeat_analysis_gaps(const struct StbeatAnalysis *analysis, double *buf, size_t cap);

// Onset envelope of 1-based `band`, copied like `stbeat_analysis_gaps`.
// Returns 0 for an invalid band.
//
// # Safety
// `analysis` is null or a live handle; `buf` is null or has `cap` slots.
size_t stbeat_analysis_envelope(const struct StbeatAnalysis *analysis,
                                size_t band,
                                double *buf,
                                size_t cap);

// Message for the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *stbeat_last_error_message(void);

// True when `estimate` is within 4% of `truth`.
bool stbeat_accuracy1(double estimate, double truth);

// True when `estimate` is within 4% of 1/3, 1/2, 1, 2 or 3 times `truth`.
bool stbeat_accuracy2(double estimate, double truth);

// Library version, a static NUL-terminated string.
const char *stbeat_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STBEAT_H */
