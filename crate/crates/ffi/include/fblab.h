#ifndef FBLAB_H
#define FBLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FblabStatus {
  FBLAB_STATUS_OK = 0,
  FBLAB_STATUS_NULL_POINTER = 1,
  FBLAB_STATUS_INVALID_ARGUMENT = 2,
  FBLAB_STATUS_DIMENSION_MISMATCH = 3,
  FBLAB_STATUS_GUARD_EXCEEDED = 4,
  FBLAB_STATUS_NO_CONVERGENCE = 5,
  FBLAB_STATUS_INFEASIBLE = 6,
  FBLAB_STATUS_PRECONDITION = 7,
  FBLAB_STATUS_IO = 8,
  FBLAB_STATUS_PANIC = 9,
} FblabStatus;

/**
 * Opaque discrete memoryless channel.
 */
typedef struct FblabChannel FblabChannel;

/**
 * Opaque finite distribution.
 */
typedef struct FblabDist FblabDist;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated, truncated to `cap`)
 * and returns its full length in bytes.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes, or null with `cap == 0`.
 */
size_t fblab_last_error(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fblab_version(void);

/**
 * # Safety
 * `masses` must point to `len` doubles; `out` must be writable.
 */
enum FblabStatus fblab_dist_new(const double *masses, size_t len, struct FblabDist **out);

/**
 * # Safety
 * `d` must come from `fblab_dist_new` and not be freed twice.
 */
void fblab_dist_free(struct FblabDist *d);

/**
 * Row-major `rows × cols` transition matrix.
 *
 * # Safety
 * `w` must point to `rows * cols` doubles; `out` must be writable.
 */
enum FblabStatus fblab_dmc_new(const double *w,
                               size_t rows,
                               size_t cols,
                               struct FblabChannel **out);

/**
 * # Safety
 * `c` must come from `fblab_dmc_new` and not be freed twice.
 */
void fblab_channel_free(struct FblabChannel *c);

/**
 * D(P‖Q) in nats; +∞ when P is not dominated by Q.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FblabStatus fblab_kl(const struct FblabDist *p, const struct FblabDist *q, double *out);

/**
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FblabStatus fblab_tv(const struct FblabDist *p, const struct FblabDist *q, double *out);

/**
 * β_α(P, Q): smallest Q-probability of acceptance with P-probability ≥ α.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum FblabStatus fblab_beta(double alpha,
                            const struct FblabDist *p,
                            const struct FblabDist *q,
                            double *out);

/**
 * W_order(P, Q) for a row-major |P| × |Q| ground cost; `order` is 1 or 2.
 *
 * # Safety
 * `cost` must point to |P|·|Q| doubles; handles live; `out` writable.
 */
enum FblabStatus fblab_wasserstein(const struct FblabDist *p,
                                   const struct FblabDist *q,
                                   const double *cost,
                                   uint8_t order,
                                   double *out);

/**
 * Capacity (nats) and dispersion (nats²); `caod` receives the output
 * distribution when non-null and `caod_len` equals the output size.
 *
 * # Safety
 * Handle live; `capacity`, `dispersion` writable; `caod` valid for `caod_len`.
 */
enum FblabStatus fblab_capacity(const struct FblabChannel *ch,
                                double tol,
                                double *capacity,
                                double *dispersion,
                                double *caod,
                                size_t caod_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBLAB_H */
