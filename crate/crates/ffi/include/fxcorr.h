#ifndef FXCORR_H
#define FXCORR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define FXC_CALL 0

#define FXC_PUT 1

/**
 * Status codes. 1 to 5 match the command line exit statuses.
 */
typedef enum FxcStatus {
  FXC_STATUS_OK = 0,
  FXC_STATUS_ERR_OTHER = 1,
  FXC_STATUS_ERR_NO_IMPLIED_VOL = 2,
  FXC_STATUS_ERR_MISSING_DATA = 3,
  FXC_STATUS_ERR_CORRELATION_OUT_OF_RANGE = 4,
  FXC_STATUS_ERR_CALENDAR_ARBITRAGE = 5,
  FXC_STATUS_ERR_NULL_POINTER = 6,
  FXC_STATUS_ERR_INVALID_ARGUMENT = 7,
  FXC_STATUS_ERR_PANIC = 8,
} FxcStatus;

/**
 * Opaque market snapshot.
 */
typedef struct FxcSnapshot FxcSnapshot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call on the same thread.
 */
const char *fxc_last_error_message(void);

/**
 * Parse a snapshot document. Free the handle with [`fxc_snapshot_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum FxcStatus fxc_snapshot_from_json(const char *json, struct FxcSnapshot **out);

/**
 * Load a snapshot from a file path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FxcStatus fxc_snapshot_from_file(const char *path, struct FxcSnapshot **out);

/**
 * # Safety
 * `snapshot` must come from this library and not be freed twice. NULL is a no-op.
 */
void fxc_snapshot_free(struct FxcSnapshot *snapshot);

/**
 * Garman-Kohlhagen price in units of the denominating currency.
 *
 * # Safety
 * `pair` must be a NUL-terminated string; `out` must be writable.
 */
enum FxcStatus fxc_gk_price(const char *pair,
                            double strike,
                            double maturity,
                            int32_t option_kind,
                            double spot,
                            double domestic_rate,
                            double foreign_rate,
                            double vol,
                            double *out);

/**
 * # Safety
 * `pair` must be a NUL-terminated string; `out` must be writable.
 */
enum FxcStatus fxc_implied_vol(const char *pair,
                               double strike,
                               double maturity,
                               int32_t option_kind,
                               double price,
                               double spot,
                               double domestic_rate,
                               double foreign_rate,
                               double *out);

/**
 * Forward vol on (t1, t2] from implied vols at t1 and t2.
 *
 * # Safety
 * `out` must be writable.
 */
enum FxcStatus fxc_forward_vol(double vol1, double vol2, double t1, double t2, double *out);

/**
 * Correlation of i/j with i/k given the vols of i/k, i/j and j/k.
 *
 * # Safety
 * `out` must be writable.
 */
enum FxcStatus fxc_triangle_corr(double vol_ik,
                                 double vol_ij,
                                 double vol_jk,
                                 bool clamp,
                                 double *out);

/**
 * Correlation of i/j with m/k from the six vols of the four currencies.
 *
 * # Safety
 * `out` must be writable.
 */
enum FxcStatus fxc_cross_corr(double vol_ij,
                              double vol_mk,
                              double vol_ik,
                              double vol_mj,
                              double vol_jk,
                              double vol_im,
                              bool clamp,
                              double *out);

/**
 * Implied correlation of two pairs over [0, horizon], in the orientations given.
 *
 * # Safety
 * `snapshot` must be a live handle; the pairs NUL-terminated strings; `out` writable.
 */
enum FxcStatus fxc_implied_corr(const struct FxcSnapshot *snapshot,
                                const char *pair_a,
                                const char *pair_b,
                                double horizon,
                                bool clamp,
                                double *out);

/**
 * Monte Carlo price of a payoff document. Writes a JSON pricing result to
 * `out`, to be released with [`fxc_string_free`].
 *
 * # Safety
 * `snapshot` must be a live handle; `payoff_json` a NUL-terminated string; `out` writable.
 */
enum FxcStatus fxc_price_json(const struct FxcSnapshot *snapshot,
                              const char *payoff_json,
                              uint64_t n_paths,
                              uint64_t seed,
                              bool antithetic,
                              char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. NULL is a no-op.
 */
void fxc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FXCORR_H */
