#ifndef DD_PRONY_H
#define DD_PRONY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DdpMergeRule {
  DDP_MERGE_RULE_POOLED = 0,
  DDP_MERGE_RULE_CROSS_PAIRS = 1,
} DdpMergeRule;

typedef enum DdpStatus {
  DDP_STATUS_OK = 0,
  DDP_STATUS_NULL_POINTER = 1,
  DDP_STATUS_INVALID_ARGUMENT = 2,
  DDP_STATUS_CONFIG = 3,
  DDP_STATUS_DEGENERATE = 4,
  DDP_STATUS_NUMERICAL = 5,
  DDP_STATUS_IO = 6,
  DDP_STATUS_PANIC = 7,
} DdpStatus;

typedef enum DdpModel {
  DDP_MODEL_IDEAL_PERIODIC = 0,
  DDP_MODEL_TRUNCATED_SINC = 1,
} DdpModel;

typedef enum DdpMethod {
  DDP_METHOD_DOPPLER_FIRST = 0,
  DDP_METHOD_DELAY_FIRST = 1,
  DDP_METHOD_PARALLEL = 2,
} DdpMethod;

typedef struct DdpEstimate DdpEstimate;

typedef struct DdpFrame DdpFrame;

typedef struct DdpGrid DdpGrid;

typedef struct DdpFusionParams {
  double delta_t;
  double delta_f;
  double delta_alpha;
  enum DdpMergeRule merge_rule;
} DdpFusionParams;

// One path in normalised units.
typedef struct DdpPath {
  double delay_over_t;
  double doppler_times_t;
  double gain_re;
  double gain_im;
} DdpPath;

// One raw pipeline candidate in normalised units.
typedef struct DdpCandidate {
  double delay_over_t;
  double doppler_times_t;
  double energy;
  // Non-zero when the candidate carries no usable estimate.
  uint8_t degenerate;
  enum DdpMethod source;
} DdpCandidate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *ddp_last_error(void);

struct DdpFusionParams ddp_fusion_params_default(void);

// Grid with `N` slots, `M` subcarriers and slot duration `T`; the
// upsampling factors and tail length take their defaults (2, 2, 2).
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum DdpStatus ddp_grid_new(size_t n, size_t m, double slot_duration, struct DdpGrid **out);

// Grid with every geometry parameter explicit.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum DdpStatus ddp_grid_new_ext(size_t n,
                                size_t m,
                                double slot_duration,
                                size_t upsample_time,
                                size_t upsample_freq,
                                size_t tail_slots,
                                struct DdpGrid **out);

// Samples in a frame on this grid, or 0 for a null grid.
//
// # Safety
// `grid` must be null or a live handle.
size_t ddp_grid_extended_len(const struct DdpGrid *grid);

// # Safety
// `grid` must be null or a handle not yet freed.
void ddp_grid_free(struct DdpGrid *grid);

// Clean pilot frame.
//
// # Safety
// `grid` must be a live handle and `out` writable.
enum DdpStatus ddp_frame_transmit(const struct DdpGrid *grid,
                                  enum DdpModel kind,
                                  struct DdpFrame **out);

// Frame from caller samples; `len` must equal [`ddp_grid_extended_len`].
//
// # Safety
// `re` and `im` must each point to `len` readable doubles.
enum DdpStatus ddp_frame_from_samples(const struct DdpGrid *grid,
                                      const double *re,
                                      const double *im,
                                      size_t len,
                                      struct DdpFrame **out);

// Noiseless multipath response to the transmit frame `tx`.
//
// # Safety
// `paths` must point to `count` readable entries.
enum DdpStatus ddp_frame_apply_channel(const struct DdpFrame *tx,
                                       const struct DdpPath *paths,
                                       size_t count,
                                       enum DdpModel kind,
                                       struct DdpFrame **out);

// Copy of `frame` with seeded complex Gaussian noise at `snr_db`.
//
// # Safety
// `frame` must be a live handle and `out` writable.
enum DdpStatus ddp_frame_add_awgn(const struct DdpFrame *frame,
                                  double snr_db,
                                  uint64_t seed,
                                  struct DdpFrame **out);

// # Safety
// `frame` must be null or a live handle.
size_t ddp_frame_len(const struct DdpFrame *frame);

// Copies the samples out; `len` must equal [`ddp_frame_len`].
//
// # Safety
// `re` and `im` must each point to `len` writable doubles.
enum DdpStatus ddp_frame_get(const struct DdpFrame *frame, double *re, double *im, size_t len);

// # Safety
// `frame` must be null or a handle not yet freed.
void ddp_frame_free(struct DdpFrame *frame);

// Estimates paths with one method; `params` may be null for defaults.
//
// # Safety
// `frame` must be a live handle, `params` null or readable, `out` writable.
enum DdpStatus ddp_estimate(const struct DdpFrame *frame,
                            enum DdpMethod which,
                            const struct DdpFusionParams *params,
                            enum DdpModel kind,
                            struct DdpEstimate **out);

// [`ddp_estimate`] with the parallel method.
//
// # Safety
// As for [`ddp_estimate`].
enum DdpStatus ddp_estimate_parallel(const struct DdpFrame *frame,
                                     const struct DdpFusionParams *params,
                                     enum DdpModel kind,
                                     struct DdpEstimate **out);

// # Safety
// `est` must be null or a live handle.
size_t ddp_estimate_len(const struct DdpEstimate *est);

// # Safety
// `est` must be a live handle and `out` writable.
enum DdpStatus ddp_estimate_get(const struct DdpEstimate *est, size_t index, struct DdpPath *out);

// # Safety
// `est` must be null or a handle not yet freed.
void ddp_estimate_free(struct DdpEstimate *est);

// Raw pipeline candidates before fusion. With `Parallel` both lists are
// written, Doppler-first first. `written` receives the number available;
// at most `capacity` entries are copied into `out`, which may be null when
// `capacity` is 0.
//
// # Safety
// `out` must point to `capacity` writable entries; `written` must be writable.
enum DdpStatus ddp_candidates(const struct DdpFrame *frame,
                              enum DdpMethod which,
                              struct DdpCandidate *out,
                              size_t capacity,
                              size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DD_PRONY_H */
