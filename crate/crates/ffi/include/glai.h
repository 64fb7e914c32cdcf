#ifndef GLAI_H
#define GLAI_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define GLAI_OK 0

#define GLAI_ERR_NULL 1

#define GLAI_ERR_CONFIG 2

#define GLAI_ERR_SHAPE 3

#define GLAI_ERR_INPUT 4

#define GLAI_ERR_CAPACITY 5

#define GLAI_ERR_RANK_DEFICIENT 6

#define GLAI_ERR_FORMAT 7

#define GLAI_ERR_VERSION 8

#define GLAI_ERR_IO 9

#define GLAI_ERR_UTF8 10

#define GLAI_ERR_PANIC 11

/**
 * Path-weight estimator.
 */
typedef struct GlaiEstimator GlaiEstimator;

/**
 * Trained or freshly initialized network.
 */
typedef struct GlaiNetwork GlaiNetwork;

/**
 * Activation patterns of a set of samples.
 */
typedef struct GlaiPatterns GlaiPatterns;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread ("" if none). The
 * pointer stays valid until the next failing call on this thread.
 */
const char *glai_last_error(void);

/**
 * Kaiming-uniform network with layer sizes `sizes[0..n_sizes]`.
 *
 * # Safety
 * `sizes` must point to `n_sizes` values; `out` must be writable.
 */
int32_t glai_network_new(const size_t *sizes,
                         size_t n_sizes,
                         uint64_t seed,
                         struct GlaiNetwork **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t glai_network_load(const char *path, struct GlaiNetwork **out);

/**
 * # Safety
 * `net` must be a live handle; `path` a NUL-terminated string.
 */
int32_t glai_network_save(const struct GlaiNetwork *net, const char *path);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void glai_network_free(struct GlaiNetwork *net);

/**
 * Number of input features (0 for a null handle).
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t glai_network_inputs(const struct GlaiNetwork *net);

/**
 * Number of outputs (0 for a null handle).
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t glai_network_outputs(const struct GlaiNetwork *net);

/**
 * Writes the logits of one sample into `logits[0..n_logits]`.
 *
 * # Safety
 * `x` must hold `n_x` doubles and `logits` must have room for `n_logits`.
 */
int32_t glai_network_forward(const struct GlaiNetwork *net,
                             const double *x,
                             size_t n_x,
                             double *logits,
                             size_t n_logits);

/**
 * Mini-batch SGD on the network in place.
 *
 * # Safety
 * `x` must hold `n_samples * n_features` doubles and `labels` `n_samples` values.
 */
int32_t glai_network_train(struct GlaiNetwork *net,
                           const double *x,
                           const uint32_t *labels,
                           size_t n_samples,
                           size_t n_features,
                           size_t epochs,
                           double lr,
                           size_t batch_size,
                           uint64_t seed);

/**
 * Captures the activation patterns of `n_samples` rows through `net`.
 *
 * # Safety
 * `x` must hold `n_samples * n_features` doubles; `out` must be writable.
 */
int32_t glai_patterns_capture(const struct GlaiNetwork *net,
                              const double *x,
                              size_t n_samples,
                              size_t n_features,
                              struct GlaiPatterns **out);

/**
 * # Safety
 * `ps` must be null or a live handle.
 */
size_t glai_patterns_len(const struct GlaiPatterns *ps);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t glai_patterns_load(const char *path, struct GlaiPatterns **out);

/**
 * # Safety
 * `ps` must be a live handle; `path` a NUL-terminated string.
 */
int32_t glai_patterns_save(const struct GlaiPatterns *ps, const char *path);

/**
 * # Safety
 * `ps` must be null or a handle not yet freed.
 */
void glai_patterns_free(struct GlaiPatterns *ps);

/**
 * Enumerates the paths of `net` (at most `max_paths`) and sets each
 * weight to the product of its route's weights.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
int32_t glai_estimator_from_network(const struct GlaiNetwork *net,
                                    size_t max_paths,
                                    struct GlaiEstimator **out);

/**
 * # Safety
 * `est` must be null or a live handle.
 */
size_t glai_estimator_path_count(const struct GlaiEstimator *est);

/**
 * Copies the path weights into `pw[0..n_pw]`; `n_pw` must equal the path count.
 *
 * # Safety
 * `pw` must have room for `n_pw` doubles.
 */
int32_t glai_estimator_weights(const struct GlaiEstimator *est, double *pw, size_t n_pw);

/**
 * Estimator outputs for sample `index` of `ps` with features `x`.
 *
 * # Safety
 * `x` must hold `n_x` doubles and `out_logits` have room for `n_out`.
 */
int32_t glai_estimator_eval(const struct GlaiEstimator *est,
                            const struct GlaiPatterns *ps,
                            size_t index,
                            const double *x,
                            size_t n_x,
                            double *out_logits,
                            size_t n_out);

/**
 * Least-squares path weights against one-hot targets, reusing the path
 * table of `est`.
 *
 * # Safety
 * `x` must hold `n_samples * n_features` doubles, `labels` `n_samples`
 * values; `ps` must describe the same samples; `out` must be writable.
 */
int32_t glai_estimator_direct_solve(const struct GlaiEstimator *est,
                                    const double *x,
                                    const uint32_t *labels,
                                    size_t n_samples,
                                    size_t n_features,
                                    const struct GlaiPatterns *ps,
                                    double ridge,
                                    struct GlaiEstimator **out);

/**
 * `alpha * a + (1 - alpha) * b`.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
int32_t glai_estimator_merge(const struct GlaiEstimator *a,
                             const struct GlaiEstimator *b,
                             double alpha,
                             struct GlaiEstimator **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t glai_estimator_load(const char *path, struct GlaiEstimator **out);

/**
 * # Safety
 * `est` must be a live handle; `path` a NUL-terminated string.
 */
int32_t glai_estimator_save(const struct GlaiEstimator *est, const char *path);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void glai_estimator_free(struct GlaiEstimator *est);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLAI_H */
