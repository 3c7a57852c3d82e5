#ifndef SKEWCAST_H
#define SKEWCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkewcastStatus {
  SKEWCAST_STATUS_OK = 0,
  SKEWCAST_STATUS_NULL_POINTER = 1,
  SKEWCAST_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid configuration, JSON or incompatible options.
   */
  SKEWCAST_STATUS_CONFIG = 3,
  /**
   * Malformed, degenerate or out-of-domain data.
   */
  SKEWCAST_STATUS_DATA = 4,
  SKEWCAST_STATUS_IO = 5,
  SKEWCAST_STATUS_SHAPE_MISMATCH = 6,
  SKEWCAST_STATUS_PANIC = 7,
} SkewcastStatus;

/**
 * Opaque fitted model.
 */
typedef struct SkewcastModel SkewcastModel;

/**
 * Opaque sales panel.
 */
typedef struct SkewcastPanel SkewcastPanel;

typedef struct SkewcastJensenGap {
  double mean_of_transformed_backmapped;
  double mean_raw;
  double gap;
  double relative_gap;
} SkewcastJensenGap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *skewcast_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *skewcast_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void skewcast_string_free(char *s);

/**
 * Read a panel CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum SkewcastStatus skewcast_panel_read_csv(const char *path, struct SkewcastPanel **out);

/**
 * Generate a synthetic panel. `config_json` may be null for defaults.
 *
 * # Safety
 * `config_json` must be null or NUL-terminated; `out` a valid pointer.
 */
enum SkewcastStatus skewcast_panel_generate(const char *config_json, struct SkewcastPanel **out);

/**
 * Write a panel as CSV.
 *
 * # Safety
 * `panel` must be a live handle; `path` NUL-terminated.
 */
enum SkewcastStatus skewcast_panel_write_csv(const struct SkewcastPanel *panel, const char *path);

/**
 * Number of observations; 0 for a null handle.
 *
 * # Safety
 * `panel` must be null or a live handle.
 */
size_t skewcast_panel_len(const struct SkewcastPanel *panel);

/**
 * Number of features per observation; 0 for a null handle.
 *
 * # Safety
 * `panel` must be null or a live handle.
 */
size_t skewcast_panel_n_features(const struct SkewcastPanel *panel);

/**
 * # Safety
 * `panel` must be null or a handle from this library, not yet freed.
 */
void skewcast_panel_free(struct SkewcastPanel *panel);

/**
 * Fit an arm on the whole panel. `arm` is a built-in id such as `"E5"` or
 * an arm JSON document; `learner_json` may be null for defaults. The
 * arm's bias corrector is fitted on the same panel and attached.
 *
 * # Safety
 * `panel` must be a live handle; strings NUL-terminated; `out` valid.
 */
enum SkewcastStatus skewcast_model_fit(const struct SkewcastPanel *panel,
                                       const char *arm,
                                       const char *learner_json,
                                       struct SkewcastModel **out);

/**
 * # Safety
 * `json` must be NUL-terminated; `out` valid.
 */
enum SkewcastStatus skewcast_model_from_json(const char *json, struct SkewcastModel **out);

/**
 * Serialize a model; free the result with [`skewcast_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` valid.
 */
enum SkewcastStatus skewcast_model_to_json(const struct SkewcastModel *model, char **out);

/**
 * Number of features the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t skewcast_model_n_features(const struct SkewcastModel *model);

/**
 * Uncorrected prediction: the internal score, or raw sales when
 * `in_raw_units` is true.
 *
 * # Safety
 * `model` must be a live handle; `features` must hold `n` values; `out` valid.
 */
enum SkewcastStatus skewcast_model_predict(const struct SkewcastModel *model,
                                           const double *features,
                                           size_t n,
                                           bool in_raw_units,
                                           double *out);

/**
 * Raw-sales forecast with the model's bias corrector applied.
 *
 * # Safety
 * `model` must be a live handle; `features` must hold `n` values; `out` valid.
 */
enum SkewcastStatus skewcast_model_forecast(const struct SkewcastModel *model,
                                            const double *features,
                                            size_t n,
                                            double *out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void skewcast_model_free(struct SkewcastModel *model);

/**
 * Per-sample deviance of `loss_json`, e.g. `{"kind":"tweedie","power":1.5,"link":"log"}`.
 *
 * # Safety
 * `loss_json` must be NUL-terminated; `out` valid.
 */
enum SkewcastStatus skewcast_deviance(const char *loss_json, double y, double mu, double *out);

/**
 * Gradient and hessian of the deviance with respect to the internal score.
 *
 * # Safety
 * `loss_json` must be NUL-terminated; `grad` and `hess` valid.
 */
enum SkewcastStatus skewcast_grad_hess(const char *loss_json,
                                       double y,
                                       double score,
                                       double *grad,
                                       double *hess);

/**
 * Jensen gap of `ys` under `transform_json`, e.g. `{"kind":"log","offset":1.0}`.
 *
 * # Safety
 * `transform_json` must be NUL-terminated; `ys` must hold `n` values; `out` valid.
 */
enum SkewcastStatus skewcast_jensen_gap(const char *transform_json,
                                        const double *ys,
                                        size_t n,
                                        struct SkewcastJensenGap *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWCAST_H */
