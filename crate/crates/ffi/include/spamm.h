#ifndef SPAMM_H
#define SPAMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpammGenerator {
  SPAMM_GENERATOR_EXPONENTIAL = 0,
  SPAMM_GENERATOR_ALGEBRAIC = 1,
  SPAMM_GENERATOR_BLOCKED_DECAY = 2,
  SPAMM_GENERATOR_RANDOM_DENSE = 3,
} SpammGenerator;

typedef enum SpammGranularity {
  SPAMM_GRANULARITY_FINE4 = 0,
  SPAMM_GRANULARITY_COARSE16 = 1,
} SpammGranularity;

typedef enum SpammStatus {
  SPAMM_STATUS_OK = 0,
  SPAMM_STATUS_NULL_POINTER = 1,
  SPAMM_STATUS_INVALID_ARGUMENT = 2,
  SPAMM_STATUS_DIMENSION_MISMATCH = 3,
  SPAMM_STATUS_INDEX_OUT_OF_RANGE = 4,
  SPAMM_STATUS_NON_FINITE = 5,
  SPAMM_STATUS_STALE_PLAN = 6,
  SPAMM_STATUS_FORMAT = 7,
  SPAMM_STATUS_IO = 8,
  SPAMM_STATUS_INTERNAL = 9,
} SpammStatus;

// Dense row-major single-precision matrix.
typedef struct SpammDense SpammDense;

// Ordered product tasks for one pair of quadtrees.
typedef struct SpammPlan SpammPlan;

// Quadtree matrix.
typedef struct SpammQuadtree SpammQuadtree;

// `C = alpha * A * B + beta * C`, products below `tau` dropped.
typedef struct SpammConfig {
  double tau;
  enum SpammGranularity granularity;
  float alpha;
  float beta;
} SpammConfig;

typedef struct SpammCounters {
  uint64_t products4;
  uint64_t skipped4;
  uint64_t tasks;
  double seconds;
} SpammCounters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *spamm_last_error_message(void);

// Static name of a status code.
const char *spamm_status_name(enum SpammStatus status);

// tau 0, fine 4x4 gating, alpha 1, beta 0.
struct SpammConfig spamm_config_default(void);

// New `rows x cols` matrix copied from `data` (row-major, `rows * cols`
// floats), or all zeros when `data` is NULL.
//
// # Safety
// `data` must be NULL or point to `rows * cols` floats; `out` must be valid.
enum SpammStatus spamm_dense_new(size_t rows,
                                 size_t cols,
                                 const float *data,
                                 struct SpammDense **out);

// # Safety
// `m` must be NULL or a handle from this library, not yet freed.
void spamm_dense_free(struct SpammDense *m);

// # Safety
// All pointers must be valid.
enum SpammStatus spamm_dense_shape(const struct SpammDense *m, size_t *rows, size_t *cols);

// # Safety
// All pointers must be valid.
enum SpammStatus spamm_dense_get(const struct SpammDense *m, size_t i, size_t j, float *value);

// # Safety
// All pointers must be valid.
enum SpammStatus spamm_dense_set(struct SpammDense *m, size_t i, size_t j, float value);

// Copies the row-major values into `buf`, which must hold `len >= rows * cols` floats.
//
// # Safety
// `buf` must point to `len` writable floats.
enum SpammStatus spamm_dense_copy(const struct SpammDense *m, float *buf, size_t len);

// Reads a MatrixMarket file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum SpammStatus spamm_dense_load(const char *path, struct SpammDense **out);

// Writes a MatrixMarket file, coordinate layout when `coordinate` is true.
//
// # Safety
// `m` must be a valid handle and `path` a NUL-terminated string.
enum SpammStatus spamm_dense_save(const struct SpammDense *m, const char *path, bool coordinate);

// Synthetic `n x n` matrix. `blocks` lists the atom block sizes used by
// the blocked-decay generator; NULL with `nblocks == 0` keeps the default.
//
// # Safety
// `blocks` must point to `nblocks` values; `out` must be valid.
enum SpammStatus spamm_generate(enum SpammGenerator kind,
                                size_t n,
                                double lambda,
                                double c,
                                const size_t *blocks,
                                size_t nblocks,
                                uint64_t seed,
                                bool symmetrize,
                                struct SpammDense **out);

// # Safety
// `d` must be a valid handle; `out` must be valid.
enum SpammStatus spamm_quadtree_from_dense(const struct SpammDense *d,
                                           size_t leaf_size,
                                           struct SpammQuadtree **out);

// # Safety
// `q` must be NULL or a handle from this library, not yet freed.
void spamm_quadtree_free(struct SpammQuadtree *q);

// # Safety
// `q` must be a valid handle; `out` must be valid.
enum SpammStatus spamm_quadtree_to_dense(const struct SpammQuadtree *q, struct SpammDense **out);

// Frobenius norm and number of stored leaves.
//
// # Safety
// All pointers must be valid.
enum SpammStatus spamm_quadtree_info(const struct SpammQuadtree *q, float *norm, size_t *leaves);

// Symbolic phase: the leaf products of `a * b` that survive `tau`.
//
// # Safety
// `a` and `b` must be valid handles; `out` must be valid.
enum SpammStatus spamm_plan_new(const struct SpammQuadtree *a,
                                const struct SpammQuadtree *b,
                                double tau,
                                struct SpammPlan **out);

// Number of leaf products in the plan, 0 for NULL.
//
// # Safety
// `p` must be NULL or a valid handle.
size_t spamm_plan_len(const struct SpammPlan *p);

// # Safety
// `p` must be NULL or a handle from this library, not yet freed.
void spamm_plan_free(struct SpammPlan *p);

// Numeric phase: `c = alpha * a * b + beta * c` over the plan's tasks.
// `counters` may be NULL.
//
// # Safety
// Handles must be valid; `c` must not alias `a` or `b`.
enum SpammStatus spamm_plan_execute(const struct SpammPlan *p,
                                    const struct SpammQuadtree *a,
                                    const struct SpammQuadtree *b,
                                    struct SpammQuadtree *c,
                                    const struct SpammConfig *config,
                                    struct SpammCounters *counters);

// Both phases: a new quadtree holding `alpha * a * b`. `counters` may be NULL.
//
// # Safety
// Handles must be valid; `out` must be valid.
enum SpammStatus spamm_multiply(const struct SpammQuadtree *a,
                                const struct SpammQuadtree *b,
                                const struct SpammConfig *config,
                                struct SpammQuadtree **out,
                                struct SpammCounters *counters);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPAMM_H */
