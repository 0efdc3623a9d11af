/* C interface to the tubal library. Every object is an opaque handle owned by
 * the caller and released with the matching *_free function. Functions return
 * a tubal_status; on failure tubal_last_error() describes the problem for the
 * calling thread. Tensors use column-major storage: entry (i, j, l) of an
 * n1 x n2 x k tensor lives at i + n1 * (j + n2 * l). */
#ifndef TUBAL_TUBAL_H
#define TUBAL_TUBAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(TUBAL_BUILDING_LIBRARY)
#define TUBAL_API __attribute__((visibility("default")))
#else
#define TUBAL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tubal_tensor tubal_tensor;
typedef struct tubal_operator tubal_operator;

typedef enum tubal_status {
  TUBAL_OK = 0,
  TUBAL_INVALID_ARGUMENT = 1,
  TUBAL_DIMENSION_MISMATCH = 2,
  TUBAL_NON_REAL = 3,
  TUBAL_CONVERGENCE = 4,
  TUBAL_DIVERGENCE = 5,
  TUBAL_CONFIG = 6,
  TUBAL_IO = 7,
  TUBAL_INTERNAL = 8
} tubal_status;

typedef enum tubal_scaling { TUBAL_SCALING_RAW = 0, TUBAL_SCALING_INV_SQRT_M = 1 } tubal_scaling;

TUBAL_API const char* tubal_version(void);
TUBAL_API const char* tubal_status_string(tubal_status status);
/* Message of the last failed call on this thread, or "" after a success. */
TUBAL_API const char* tubal_last_error(void);

/* Tensors. values may be NULL for a zero tensor. */
TUBAL_API tubal_status tubal_tensor_create(size_t n1, size_t n2, size_t k, const double* values,
                                           tubal_tensor** out);
TUBAL_API tubal_status tubal_tensor_identity(size_t n, size_t k, tubal_tensor** out);
/* I.i.d. standard normal entries. */
TUBAL_API tubal_status tubal_tensor_gaussian(size_t n1, size_t n2, size_t k, uint64_t seed,
                                             tubal_tensor** out);
TUBAL_API void tubal_tensor_free(tubal_tensor* t);
TUBAL_API tubal_status tubal_tensor_shape(const tubal_tensor* t, size_t* n1, size_t* n2, size_t* k);
/* Borrowed pointer to n1*n2*k values, valid until the tensor is freed. */
TUBAL_API const double* tubal_tensor_data(const tubal_tensor* t);

TUBAL_API tubal_status tubal_tprod(const tubal_tensor* a, const tubal_tensor* b, tubal_tensor** out);
TUBAL_API tubal_status tubal_ttranspose(const tubal_tensor* t, tubal_tensor** out);
/* t = V * S * W^T. Any output pointer may be NULL. */
TUBAL_API tubal_status tubal_tsvd(const tubal_tensor* t, tubal_tensor** V, tubal_tensor** S,
                                  tubal_tensor** W);
/* rel_tol <= 0 selects the library default. */
TUBAL_API tubal_status tubal_tubal_rank(const tubal_tensor* t, double rel_tol, size_t* rank);
TUBAL_API tubal_status tubal_norms(const tubal_tensor* t, double* spectral, double* frobenius,
                                   double* tubal_nuclear);
TUBAL_API tubal_status tubal_tensor_save(const tubal_tensor* t, const char* path);
TUBAL_API tubal_status tubal_tensor_load(const char* path, tubal_tensor** out);

/* Sensing operators. */
TUBAL_API tubal_status tubal_operator_gaussian(size_t n, size_t k, size_t m, uint64_t seed,
                                               tubal_scaling scaling, tubal_operator** out);
TUBAL_API void tubal_operator_free(tubal_operator* op);
TUBAL_API tubal_status tubal_operator_shape(const tubal_operator* op, size_t* n, size_t* k,
                                            size_t* m);
/* y must hold m values. */
TUBAL_API tubal_status tubal_operator_forward(const tubal_operator* op, const tubal_tensor* t,
                                              double* y);
/* e holds m values; the result is n x n x k. */
TUBAL_API tubal_status tubal_operator_adjoint(const tubal_operator* op, const double* e,
                                              tubal_tensor** out);
TUBAL_API tubal_status tubal_operator_save(const tubal_operator* op, const char* path);
TUBAL_API tubal_status tubal_operator_load(const char* path, tubal_operator** out);

/* Sampled lower bound on the t-RIP constant at tubal rank r. */
TUBAL_API tubal_status tubal_trip_probe(const tubal_operator* op, size_t r, size_t trials,
                                        uint64_t seed, double* delta_hat);
TUBAL_API tubal_status tubal_minimax_floor(size_t n, size_t r, size_t k, double sigma, size_t m,
                                           double delta, double* floor);

/* Runs a tubal-solve command (synth, recover, complete, sweep, trip-probe)
 * and returns its exit code: 0 ok, 1 config error, 2 run failure, 3 I/O
 * error. Progress and errors go to stderr when verbose is nonzero. */
TUBAL_API int tubal_run_command(const char* command, const char* config_path, const char* out_dir,
                                int workers, int aggregate, int verbose);

#ifdef __cplusplus
}
#endif

#endif
