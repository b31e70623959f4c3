#ifndef REVIEWSCOPE_H
#define REVIEWSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RvsPolarity {
  RVS_POLARITY_NEGATIVE = 0,
  RVS_POLARITY_NEUTRAL = 1,
  RVS_POLARITY_POSITIVE = 2,
} RvsPolarity;

typedef enum RvsStatus {
  RVS_STATUS_OK = 0,
  RVS_STATUS_NULL_POINTER = 1,
  RVS_STATUS_INVALID_ARGUMENT = 2,
  RVS_STATUS_INVALID_UTF8 = 3,
  RVS_STATUS_PARSE = 4,
  RVS_STATUS_IO = 5,
  RVS_STATUS_BACKEND = 6,
  RVS_STATUS_PANIC = 7,
  /**
   * The call completed and wrote its outputs, but some inputs were skipped.
   */
  RVS_STATUS_PARTIAL = 8,
} RvsStatus;

/**
 * Accumulates predictions and ground truth for an in-memory evaluation.
 */
typedef struct RvsEvaluator RvsEvaluator;

/**
 * A loaded configuration.
 */
typedef struct RvsPipeline RvsPipeline;

typedef struct RvsReport RvsReport;

/**
 * Pixel box, `x_min < x_max`, `y_min < y_max`.
 */
typedef struct RvsBox {
  double x_min;
  double y_min;
  double x_max;
  double y_max;
} RvsBox;

typedef struct RvsAnalyzeSummary {
  size_t total;
  size_t annotated;
  size_t inconsistent;
  size_t fake;
  size_t kept;
  size_t failed;
} RvsAnalyzeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rvs_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rvs_string_free(char *s);

/**
 * Library version, statically allocated.
 */
const char *rvs_version(void);

/**
 * # Safety
 * Pointers must be null or valid for the duration of the call.
 */
enum RvsStatus rvs_iou(const struct RvsBox *a, const struct RvsBox *b, double *out);

/**
 * Default star-to-polarity mapping for `stars` in 1..=5.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum RvsStatus rvs_rating_polarity(uint8_t stars, enum RvsPolarity *out);

/**
 * # Safety
 * `out` must be null or valid for writes.
 */
enum RvsStatus rvs_sentiment_inconsistency(enum RvsPolarity rating,
                                           enum RvsPolarity comment,
                                           bool *out);

/**
 * New evaluator with the given review-text confidence and IoU thresholds.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum RvsStatus rvs_evaluator_new(double conf_threshold,
                                 double precision_iou,
                                 struct RvsEvaluator **out);

/**
 * # Safety
 * `ev` must come from [`rvs_evaluator_new`]; other pointers must be null
 * or valid.
 */
enum RvsStatus rvs_evaluator_add_prediction(struct RvsEvaluator *ev,
                                            const char *image_id,
                                            uint8_t class_code,
                                            double confidence,
                                            const struct RvsBox *bbox);

/**
 * # Safety
 * As for [`rvs_evaluator_add_prediction`].
 */
enum RvsStatus rvs_evaluator_add_ground_truth(struct RvsEvaluator *ev,
                                              const char *image_id,
                                              uint8_t class_code,
                                              const struct RvsBox *bbox);

/**
 * Scores everything added so far. The evaluator stays usable.
 *
 * # Safety
 * `ev` must come from [`rvs_evaluator_new`]; `out` must be null or valid.
 */
enum RvsStatus rvs_evaluator_compute(const struct RvsEvaluator *ev, struct RvsReport **out);

/**
 * # Safety
 * `ev` must be null or come from [`rvs_evaluator_new`] and not be used again.
 */
void rvs_evaluator_free(struct RvsEvaluator *ev);

/**
 * Scores a directory of detection files against a YOLO annotation
 * directory with default settings.
 *
 * # Safety
 * Pointers must be null or valid; strings NUL-terminated.
 */
enum RvsStatus rvs_evaluate_dirs(const char *predictions_dir,
                                 const char *ground_truth_dir,
                                 struct RvsReport **out);

/**
 * # Safety
 * `report` must come from this library; `out` must be null or valid.
 */
enum RvsStatus rvs_report_map(const struct RvsReport *report, double *out);

/**
 * # Safety
 * As for [`rvs_report_map`].
 */
enum RvsStatus rvs_report_precision(const struct RvsReport *report, double *out);

/**
 * True positives, false positives and false negatives behind the
 * review-text precision.
 *
 * # Safety
 * As for [`rvs_report_map`].
 */
enum RvsStatus rvs_report_counts(const struct RvsReport *report,
                                 size_t *tp,
                                 size_t *fp,
                                 size_t *false_negatives);

/**
 * AP of one class at IoU threshold `0.50 + 0.05 * threshold_index`.
 * Classes without ground truth have no AP and give `InvalidArgument`.
 *
 * # Safety
 * As for [`rvs_report_map`].
 */
enum RvsStatus rvs_report_class_ap(const struct RvsReport *report,
                                   uint8_t class_code,
                                   size_t threshold_index,
                                   double *out);

/**
 * Report as JSON; free the result with [`rvs_string_free`].
 *
 * # Safety
 * As for [`rvs_report_map`].
 */
enum RvsStatus rvs_report_to_json(const struct RvsReport *report, char **out);

/**
 * # Safety
 * `report` must be null or come from this library and not be used again.
 */
void rvs_report_free(struct RvsReport *report);

/**
 * Loads a TOML configuration, or the defaults when `config_path` is null.
 *
 * # Safety
 * `config_path` must be null or a NUL-terminated string; `out` must be
 * null or valid.
 */
enum RvsStatus rvs_pipeline_new(const char *config_path, struct RvsPipeline **out);

/**
 * # Safety
 * `pipeline` must come from [`rvs_pipeline_new`].
 */
enum RvsStatus rvs_pipeline_set_workers(struct RvsPipeline *pipeline, size_t workers);

/**
 * Extracts records from the images under `input_dir` into `output_path`.
 * Returns `Partial` when some images were skipped. `records_out` may be
 * null.
 *
 * # Safety
 * `pipeline` must come from [`rvs_pipeline_new`]; strings NUL-terminated.
 */
enum RvsStatus rvs_pipeline_extract(const struct RvsPipeline *pipeline,
                                    const char *input_dir,
                                    const char *output_path,
                                    size_t *records_out);

/**
 * Annotates `input_path` into `annotated_path` and writes the filtered
 * records to `filtered_path` (or `<annotated stem>.filtered.jsonl` when
 * null). `summary` may be null.
 *
 * # Safety
 * `pipeline` must come from [`rvs_pipeline_new`]; strings NUL-terminated.
 */
enum RvsStatus rvs_pipeline_analyze(const struct RvsPipeline *pipeline,
                                    const char *input_path,
                                    const char *annotated_path,
                                    const char *filtered_path,
                                    bool drop_inconsistent,
                                    bool drop_fake,
                                    struct RvsAnalyzeSummary *summary);

/**
 * # Safety
 * `pipeline` must be null or come from [`rvs_pipeline_new`] and not be
 * used again.
 */
void rvs_pipeline_free(struct RvsPipeline *pipeline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REVIEWSCOPE_H */
