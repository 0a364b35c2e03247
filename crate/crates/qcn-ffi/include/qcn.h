/* C interface to the qcn quantum causal network library. */

#ifndef QCN_H
#define QCN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum QcnStatus {
  /**
   * Success.
   */
  QCN_OK = 0,
  /**
   * A required pointer argument was null.
   */
  QCN_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  QCN_UTF8 = 2,
  /**
   * The model text failed to parse.
   */
  QCN_PARSE = 3,
  /**
   * The model text parsed but is semantically invalid.
   */
  QCN_SEMANTIC = 4,
  /**
   * A node, projset, or state name is not declared in the model.
   */
  QCN_UNKNOWN_NAME = 5,
  /**
   * The output buffer is too small.
   */
  QCN_BUFFER_TOO_SMALL = 6,
  /**
   * A numeric operation failed (for example zero-probability conditioning).
   */
  QCN_NUMERIC = 7,
  /**
   * The local distributions do not respect the graph.
   */
  QCN_INVALID_MODEL = 8,
} QcnStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct QcnModel QcnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next FFI call on the same thread.
 */
const char *qcn_last_error(void);

/**
 * Parse model text and build the network. On success `*out` owns the handle;
 * release it with [`qcn_model_free`].
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QcnStatus qcn_model_parse(const char *text, double tolerance, struct QcnModel **out);

/**
 * Release a handle returned by [`qcn_model_parse`] or [`qcn_model_do`].
 * Passing null is a no-op.
 *
 * # Safety
 * `m` must be a handle from this library, not yet freed.
 */
void qcn_model_free(struct QcnModel *m);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
uintptr_t qcn_model_node_count(const struct QcnModel *m);

/**
 * Node id at `index`, or null if out of range. The pointer stays valid for
 * the lifetime of the handle.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
const char *qcn_model_node_id(const struct QcnModel *m, uintptr_t index);

/**
 * Dimension of the node at `index`, or 0 if out of range.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
uintptr_t qcn_model_node_dim(const struct QcnModel *m, uintptr_t index);

/**
 * Check that the local distributions respect the graph, probing with
 * `fiducial_samples` random basis families per check.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
enum QcnStatus qcn_model_validate(const struct QcnModel *m,
                                  uintptr_t fiducial_samples,
                                  double tolerance);

/**
 * Dimension of the joint space (product of node dimensions), or 0 for null.
 *
 * # Safety
 * `m` must be a live handle or null.
 */
uintptr_t qcn_model_joint_dim(const struct QcnModel *m);

/**
 * Build the joint density operator and write it into `out` as row-major
 * interleaved re/im doubles. `len` is the buffer length in doubles and must
 * be at least `2 * d * d` where `d = qcn_model_joint_dim(m)`.
 *
 * # Safety
 * `m` must be a live handle; `out` must point to `len` writable doubles.
 */
enum QcnStatus qcn_model_joint(const struct QcnModel *m, double *out, uintptr_t len);

/**
 * Write the reduced density operator of `n_nodes` nodes named in `node_ids`
 * into `out` (same layout as [`qcn_model_joint`]; the marginal dimension is
 * the product of the named nodes' dimensions, in the model's node order).
 *
 * # Safety
 * `m` must be a live handle; `node_ids` must point to `n_nodes`
 * NUL-terminated strings; `out` must point to `len` writable doubles.
 */
enum QcnStatus qcn_model_marginal(const struct QcnModel *m,
                                  const char *const *node_ids,
                                  uintptr_t n_nodes,
                                  double *out,
                                  uintptr_t len);

/**
 * Set node `target` to the declared state named `state` by local surgery and
 * return the post-intervention model as a new handle in `*out`.
 *
 * # Safety
 * `m` must be a live handle; `target` and `state` NUL-terminated strings;
 * `out` a valid pointer.
 */
enum QcnStatus qcn_model_do(const struct QcnModel *m,
                            const char *target,
                            const char *state,
                            struct QcnModel **out);

/**
 * Enumerate the outcomes of a projective reduction at node `target` using the
 * declared projset named `projset`, writing one probability per outcome into
 * `out_probs`. `len` is the capacity of `out_probs`; the number written goes
 * to `*out_count`.
 *
 * # Safety
 * `m` must be a live handle; `target` and `projset` NUL-terminated strings;
 * `out_probs` must point to `len` writable doubles; `out_count` valid.
 */
enum QcnStatus qcn_model_reduce_probabilities(const struct QcnModel *m,
                                              const char *target,
                                              const char *projset,
                                              double *out_probs,
                                              uintptr_t len,
                                              uintptr_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCN_H */
