#ifndef CILGRAPH_H
#define CILGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CgStatus {
  CG_STATUS_OK = 0,
  CG_STATUS_NULL_POINTER = 1,
  CG_STATUS_INVALID_ARGUMENT = 2,
  // Unreadable, malformed or degenerate input data.
  CG_STATUS_DATA_ERROR = 3,
  // The solver failed (non-convergence, singular system).
  CG_STATUS_SOLVER_ERROR = 4,
  // A Rust panic was caught at the boundary.
  CG_STATUS_PANIC = 5,
} CgStatus;

// Opaque dense matrix.
typedef struct CgMatrix CgMatrix;

// Options for [`cg_solve`]. Start from [`cg_solve_options_default`].
typedef struct CgSolveOptions {
  double lambda;
  double gamma;
  // Smoothing for the L1 / L21 / nuclear surrogates; `<= 0` selects the
  // data-scaled default.
  double epsilon;
  // Correntropy kernel size (the starting value unless `sigma_fixed`).
  double sigma2;
  bool sigma_fixed;
  double tol;
  size_t max_iter;
  // `-1` uses the method's default, `0` off, `1` on.
  int32_t zero_diagonal;
  // Scale data columns to unit norm first.
  bool normalize;
} CgSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. Valid until
// the next `cg_*` call on the same thread.
const char *cg_last_error(void);

// Library version as a static NUL-terminated string.
const char *cg_version(void);

// Copies a `rows × cols` column-major buffer into a new matrix.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum CgStatus cg_matrix_new(size_t rows, size_t cols, const double *data, struct CgMatrix **out);

// Reads a matrix file; `.bin` selects the binary format, anything else CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CgStatus cg_matrix_load(const char *path, struct CgMatrix **out);

// Writes a matrix file; the format follows the extension as in [`cg_matrix_load`].
//
// # Safety
// `m` must be a live handle and `path` a NUL-terminated string.
enum CgStatus cg_matrix_save(const struct CgMatrix *m, const char *path);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
size_t cg_matrix_rows(const struct CgMatrix *m);

// Number of columns, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
size_t cg_matrix_cols(const struct CgMatrix *m);

// Copies the entries, column-major, into `buf` of length `len`
// (which must equal rows × cols).
//
// # Safety
// `m` must be a live handle; `buf` must hold `len` writable doubles.
enum CgStatus cg_matrix_copy(const struct CgMatrix *m, double *buf, size_t len);

// Releases a handle. Null is ignored.
//
// # Safety
// `m` must be null or a handle not yet freed.
void cg_matrix_free(struct CgMatrix *m);

struct CgSolveOptions cg_solve_options_default(void);

// Learns the `n × n` coefficient matrix of the `d × n` data `x` with the
// named method (`cil2`, `rcil2`, `lsr`, `ssc_irls`, `lrr_irls`, `msr_irls`).
// `options` may be null for the defaults; `iterations` may be null.
//
// # Safety
// `x` must be a live handle, `method` a NUL-terminated string, `out` writable.
enum CgStatus cg_solve(const struct CgMatrix *x,
                       const char *method,
                       const struct CgSolveOptions *options,
                       struct CgMatrix **out,
                       size_t *iterations);

// Spectral clustering of the affinity `(|Z| + |Zᵀ|)/2` into `k` groups.
// Writes `len` labels (which must equal n) in `0..k`.
//
// # Safety
// `z` must be a live handle; `labels` must hold `len` writable values.
enum CgStatus cg_cluster(const struct CgMatrix *z,
                         size_t k,
                         uint64_t seed,
                         size_t *labels,
                         size_t len);

// Clustering accuracy (best label matching) and NMI of `pred` against
// `truth`, both of length `n`. Either output may be null.
//
// # Safety
// `truth` and `pred` must hold `n` readable values.
enum CgStatus cg_evaluate(const size_t *truth,
                          const size_t *pred,
                          size_t n,
                          double *accuracy,
                          double *nmi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CILGRAPH_H */
