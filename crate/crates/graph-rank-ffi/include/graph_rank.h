#ifndef GRAPH_RANK_H
#define GRAPH_RANK_H

/* Generated by cbindgen from graph-rank-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum grk_status {
  GRK_OK = 0,
  GRK_NULL_POINTER = 1,
  GRK_INVALID_ARGUMENT = 2,
  GRK_DISCONNECTED = 3,
  GRK_NOT_IDENTIFIABLE = 4,
  GRK_DEGENERATE_VARIANCE = 5,
  GRK_NO_COMPARISONS = 6,
  GRK_INTERNAL_ERROR = 7,
} grk_status;

/**
 * Opaque fitted model.
 */
typedef struct grk_fit grk_fit;

/**
 * Opaque comparison collector.
 */
typedef struct grk_graph grk_graph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread. Never null.
 */
const char *grk_last_error_message(void);

/**
 * Creates a comparison collector for `items` items (indices `0..items`).
 * Returns null when `items < 2`. Free with `grk_graph_free`.
 */
struct grk_graph *grk_graph_new(size_t items);

/**
 * Records one comparison with outcome oriented `item_i` minus `item_j`.
 *
 * # Safety
 * `graph` must be a live handle from [`grk_graph_new`].
 */
enum grk_status grk_graph_add_comparison(struct grk_graph *graph,
                                         size_t item_i,
                                         size_t item_j,
                                         double outcome);

/**
 * Number of items the collector was created with.
 *
 * # Safety
 * `graph` must be null or a live handle from [`grk_graph_new`].
 */
size_t grk_graph_items(const struct grk_graph *graph);

/**
 * Number of comparisons recorded so far.
 *
 * # Safety
 * `graph` must be null or a live handle from [`grk_graph_new`].
 */
size_t grk_graph_comparisons(const struct grk_graph *graph);

/**
 * Releases a collector. Null is ignored.
 *
 * # Safety
 * `graph` must be null or a handle from [`grk_graph_new`] not yet freed.
 */
void grk_graph_free(struct grk_graph *graph);

/**
 * Fits merits under the sum-to-zero constraint.
 *
 * # Safety
 * `graph` must be a live handle; `out_fit` must point to writable storage.
 */
enum grk_status grk_fit_sum_zero(const struct grk_graph *graph, struct grk_fit **out_fit);

/**
 * Fits merits with `anchor_item` pinned to merit zero.
 *
 * # Safety
 * `graph` must be a live handle; `out_fit` must point to writable storage.
 */
enum grk_status grk_fit_anchored(const struct grk_graph *graph,
                                 size_t anchor_item,
                                 struct grk_fit **out_fit);

/**
 * Number of items behind a fit (the length of the merit vector).
 *
 * # Safety
 * `fit` must be null or a live handle from a `grk_fit_*` constructor.
 */
size_t grk_fit_items(const struct grk_fit *fit);

/**
 * Copies the merit vector into `out` (length `len`, which must equal
 * `grk_fit_items`).
 *
 * # Safety
 * `fit` must be a live handle; `out` must point to `len` writable doubles.
 */
enum grk_status grk_fit_merits(const struct grk_fit *fit, double *out, size_t len);

/**
 * Copies the derived ranks (1 = best; ties share their maximal rank).
 *
 * # Safety
 * `fit` must be a live handle; `out` must point to `len` writable entries.
 */
enum grk_status grk_fit_ranks(const struct grk_fit *fit, uint32_t *out, size_t len);

/**
 * Residual variance estimate of the fit (0 for an exact fit).
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double grk_fit_sigma2(const struct grk_fit *fit);

/**
 * Algebraic connectivity of the underlying comparison graph.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double grk_fit_lambda2(const struct grk_fit *fit);

/**
 * Bottleneck comparison count over spanning trees.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
uint64_t grk_fit_bottleneck(const struct grk_fit *fit);

/**
 * Variance of the merit difference `item_i` minus `item_j` (independent of
 * the fit's constraint).
 *
 * # Safety
 * `fit` must be a live handle; `out_variance` must be writable.
 */
enum grk_status grk_fit_pair_variance(const struct grk_fit *fit,
                                      size_t item_i,
                                      size_t item_j,
                                      double *out_variance);

/**
 * Releases a fit. Null is ignored.
 *
 * # Safety
 * `fit` must be null or a handle from a `grk_fit_*` constructor not yet freed.
 */
void grk_fit_free(struct grk_fit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_RANK_H */
