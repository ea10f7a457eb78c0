#ifndef STTGCN_H
#define STTGCN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SttStatus {
  STT_STATUS_OK = 0,
  /**
   * Invalid arguments: bad shapes, ranges, or modes.
   */
  STT_STATUS_USAGE = 1,
  /**
   * Malformed input data.
   */
  STT_STATUS_FORMAT = 2,
  /**
   * Numerical failure (e.g. an SVD that did not converge).
   */
  STT_STATUS_NUMERICAL = 3,
  /**
   * Filesystem failure.
   */
  STT_STATUS_IO = 4,
  /**
   * A required pointer argument was null.
   */
  STT_STATUS_NULL_POINTER = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  STT_STATUS_UTF8 = 6,
  /**
   * The requested quantity is undefined for the inputs.
   */
  STT_STATUS_UNDEFINED = 7,
  /**
   * An internal panic was caught at the boundary.
   */
  STT_STATUS_PANIC = 8,
} SttStatus;

/**
 * Decomposition backend for graph reconstruction.
 */
typedef enum SttMethod {
  STT_METHOD_TUCKER = 0,
  STT_METHOD_L1_TUCKER = 1,
  STT_METHOD_TENSOR_TRAIN = 2,
} SttMethod;

/**
 * Opaque spatial road graph.
 */
typedef struct SttGraph SttGraph;

/**
 * Opaque dense matrix (row-major f64).
 */
typedef struct SttMatrix SttMatrix;

/**
 * Opaque dense rank-3 tensor.
 */
typedef struct SttTensor SttTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *stt_version(void);

/**
 * Copy the calling thread's last error message (NUL-terminated, truncated
 * to `len`). Returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
size_t stt_last_error(char *buf, size_t len);

/**
 * Parse a `from,to,cost` distance file into a spatial graph. `nodes` = 0
 * infers the count from the largest id.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` a valid pointer.
 */
enum SttStatus stt_graph_from_distance_csv(const char *path, size_t nodes, struct SttGraph **out);

/**
 * Build a spatial graph from parallel edge arrays (1-based node ids).
 *
 * # Safety
 * `from`, `to` and `cost` must each point to `count` readable elements;
 * `out` must be a valid pointer.
 */
enum SttStatus stt_graph_from_edges(const uint64_t *from,
                                    const uint64_t *to,
                                    const double *cost,
                                    size_t count,
                                    size_t nodes,
                                    struct SttGraph **out);

/**
 * Node count of a graph handle (0 for null).
 */
size_t stt_graph_nodes(const struct SttGraph *graph);

/**
 * # Safety
 * `graph` must come from this library and not be freed twice.
 */
void stt_graph_free(struct SttGraph *graph);

/**
 * Binary `3n x 3n` fusion matrix of a spatial graph.
 *
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_build_fusion_matrix(const struct SttGraph *graph, struct SttMatrix **out);

/**
 * `n x n x 9` adjacency tensor of a spatial graph.
 *
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_build_adjacency_tensor(const struct SttGraph *graph, struct SttTensor **out);

/**
 * Reconstruct the real-valued fusion graph offline with the chosen
 * decomposition (full-size core, diagonal fixed to 1).
 *
 * # Safety
 * `graph` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_reconstruct(const struct SttGraph *graph,
                               enum SttMethod method,
                               uint64_t seed,
                               struct SttMatrix **out);

/**
 * Convert a `3n x 3n` fusion matrix handle into its adjacency tensor.
 *
 * # Safety
 * `fusion` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_fusion_to_tensor(const struct SttMatrix *fusion, struct SttTensor **out);

size_t stt_matrix_rows(const struct SttMatrix *m);

size_t stt_matrix_cols(const struct SttMatrix *m);

/**
 * Read one entry.
 *
 * # Safety
 * `m` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_matrix_get(const struct SttMatrix *m, size_t row, size_t col, double *out);

/**
 * Copy the whole matrix row-major into `out` (`len` must be rows*cols).
 *
 * # Safety
 * `m` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SttStatus stt_matrix_copy_data(const struct SttMatrix *m, double *out, size_t len);

/**
 * Save as an `STM1` container.
 *
 * # Safety
 * `m` must be a live handle; `path` a valid NUL-terminated string.
 */
enum SttStatus stt_matrix_save(const struct SttMatrix *m, const char *path);

/**
 * Load an `STM1` container.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` a valid pointer.
 */
enum SttStatus stt_matrix_load(const char *path, struct SttMatrix **out);

/**
 * # Safety
 * `m` must come from this library and not be freed twice.
 */
void stt_matrix_free(struct SttMatrix *m);

/**
 * Dimensions of a tensor handle.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SttStatus stt_tensor_dims(const struct SttTensor *t, size_t *d1, size_t *d2, size_t *d3);

/**
 * Read one entry (0-based indices).
 *
 * # Safety
 * `t` must be a live handle; `out` a valid pointer.
 */
enum SttStatus stt_tensor_get(const struct SttTensor *t, size_t i, size_t j, size_t k, double *out);

/**
 * Save as an `STT1` container.
 *
 * # Safety
 * `t` must be a live handle; `path` a valid NUL-terminated string.
 */
enum SttStatus stt_tensor_save(const struct SttTensor *t, const char *path);

/**
 * Load an `STT1` container.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` a valid pointer.
 */
enum SttStatus stt_tensor_load(const char *path, struct SttTensor **out);

/**
 * # Safety
 * `t` must come from this library and not be freed twice.
 */
void stt_tensor_free(struct SttTensor *t);

/**
 * Mean absolute error over two equal-length arrays.
 *
 * # Safety
 * `y` and `pred` must each point to `len` readable doubles; `out` must be
 * a valid pointer.
 */
enum SttStatus stt_metric_mae(const double *y, const double *pred, size_t len, double *out);

/**
 * Root mean squared error.
 *
 * # Safety
 * As [`stt_metric_mae`].
 */
enum SttStatus stt_metric_rmse(const double *y, const double *pred, size_t len, double *out);

/**
 * Mean absolute percentage error (percent), zero targets excluded;
 * `STT_STATUS_UNDEFINED` when every target is zero.
 *
 * # Safety
 * As [`stt_metric_mae`].
 */
enum SttStatus stt_metric_mape(const double *y, const double *pred, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STTGCN_H */
