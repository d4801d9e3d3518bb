#ifndef BTL_CPD_H
#define BTL_CPD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BtlMethod {
  BTL_METHOD_DP = 0,
  BTL_METHOD_DPLR = 1,
  BTL_METHOD_WBS_GLR = 2,
  BTL_METHOD_WBS_SST = 3,
  BTL_METHOD_WBS_BORDA = 4,
} BtlMethod;

typedef enum BtlStatus {
  BTL_STATUS_OK = 0,
  BTL_STATUS_NULL_POINTER = 1,
  BTL_STATUS_MALFORMED_INPUT = 2,
  BTL_STATUS_DISCONNECTED_GRAPH = 3,
  BTL_STATUS_NON_CONVERGENCE = 4,
  BTL_STATUS_INTERNAL = 5,
  BTL_STATUS_PANIC = 6,
  BTL_STATUS_BUFFER_TOO_SMALL = 7,
} BtlStatus;

// A set of change points on `1..=t_max`.
typedef struct BtlSegmentation BtlSegmentation;

// A validated comparison stream.
typedef struct BtlSeries BtlSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a series over the complete graph on `n` items; record `k` says
// `winners[k]` beat `losers[k]` at time `k + 1`.
//
// # Safety
// `winners` and `losers` must be valid for `len` reads; `out` must be a
// valid pointer to write the handle to.
enum BtlStatus btl_series_new(size_t n,
                              const size_t *winners,
                              const size_t *losers,
                              size_t len,
                              struct BtlSeries **out);

// Like [`btl_series_new`] but restricted to the graph with edges
// `(edge_a[k], edge_b[k])`. With `edge_count == 0` the graph is complete.
//
// # Safety
// Every array must be valid for its stated length; `out` must be writable.
enum BtlStatus btl_series_with_edges(size_t n,
                                     const size_t *edge_a,
                                     const size_t *edge_b,
                                     size_t edge_count,
                                     const size_t *winners,
                                     const size_t *losers,
                                     size_t len,
                                     struct BtlSeries **out);

// Reads a `t,winner,loser` CSV file; labels map to indices by first
// appearance and the graph is complete.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum BtlStatus btl_series_from_csv(const char *path, struct BtlSeries **out);

// Series length `T`, or 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
size_t btl_series_len(const struct BtlSeries *series);

// Number of items, or 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
size_t btl_series_items(const struct BtlSeries *series);

// # Safety
// `series` must be null or a handle not yet freed.
void btl_series_free(struct BtlSeries *series);

// Detects change points with penalty (or threshold) `gamma` using the
// default ridge solver and method defaults; `seed` drives WBS sampling.
//
// # Safety
// `series` must be a live handle; `out` must be writable.
enum BtlStatus btl_detect(const struct BtlSeries *series,
                          enum BtlMethod method,
                          double gamma,
                          uint64_t seed,
                          struct BtlSegmentation **out);

// Locally refines `prelim`.
//
// # Safety
// `series` and `prelim` must be live handles; `out` must be writable.
enum BtlStatus btl_refine(const struct BtlSeries *series,
                          const struct BtlSegmentation *prelim,
                          struct BtlSegmentation **out);

// Builds a segmentation from strictly increasing points in `(1, t_max]`.
//
// # Safety
// `points` must be valid for `count` reads; `out` must be writable.
enum BtlStatus btl_segmentation_new(size_t t_max,
                                    const size_t *points,
                                    size_t count,
                                    struct BtlSegmentation **out);

// Number of change points, or 0 for a null handle.
//
// # Safety
// `seg` must be null or a live handle.
size_t btl_segmentation_count(const struct BtlSegmentation *seg);

// # Safety
// `seg` must be null or a live handle.
size_t btl_segmentation_t_max(const struct BtlSegmentation *seg);

// Copies the change points into `buf`. `*written` receives the number of
// points; when `capacity` is too small nothing is copied and
// `BufferTooSmall` is returned with the required count in `*written`.
//
// # Safety
// `seg` must be a live handle, `buf` valid for `capacity` writes and
// `written` writable.
enum BtlStatus btl_segmentation_points(const struct BtlSegmentation *seg,
                                       size_t *buf,
                                       size_t capacity,
                                       size_t *written);

// # Safety
// `seg` must be null or a handle not yet freed.
void btl_segmentation_free(struct BtlSegmentation *seg);

// Hausdorff distance between two segmentations: `INFINITY` when exactly
// one is empty, `NAN` for a null handle.
//
// # Safety
// Both pointers must be null or live handles.
double btl_hausdorff(const struct BtlSegmentation *a, const struct BtlSegmentation *b);

// Fits scores on the inclusive interval `[first, last]` with the default
// solver. `theta` receives one score per item; `objective` (optional)
// receives the negative log-likelihood.
//
// # Safety
// `series` must be a live handle, `theta` valid for `capacity` writes and
// `objective` null or writable.
enum BtlStatus btl_fit(const struct BtlSeries *series,
                       size_t first,
                       size_t last,
                       double *theta,
                       size_t capacity,
                       double *objective);

// Copies the calling thread's last error message (NUL-terminated,
// truncated to fit) into `buf` and returns the full message length
// excluding the terminator. An empty message means the last call
// succeeded.
//
// # Safety
// `buf` must be null or valid for `capacity` writes.
size_t btl_last_error(char *buf, size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BTL_CPD_H */
