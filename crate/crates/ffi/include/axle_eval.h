#ifndef AXLE_EVAL_H
#define AXLE_EVAL_H

#pragma once

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AxleDecision {
  AXLE_DECISION_REJECT = 0,
  AXLE_DECISION_FAIL_TO_REJECT = 1,
} AxleDecision;

typedef enum AxleFormat {
  AXLE_FORMAT_CSV = 0,
  AXLE_FORMAT_JSON = 1,
  AXLE_FORMAT_MARKDOWN = 2,
} AxleFormat;

typedef enum AxleInterpolation {
  AXLE_INTERPOLATION_ALL_POINT = 0,
  AXLE_INTERPOLATION_ELEVEN_POINT = 1,
} AxleInterpolation;

typedef enum AxlePMethod {
  AXLE_P_METHOD_EXACT = 0,
  AXLE_P_METHOD_NORMAL_APPROXIMATION = 1,
} AxlePMethod;

typedef enum AxleStatus {
  AXLE_STATUS_OK = 0,
  AXLE_STATUS_NULL_POINTER = 1,
  AXLE_STATUS_INVALID_ARGUMENT = 2,
  AXLE_STATUS_PARSE = 3,
  AXLE_STATUS_IO = 4,
  // Well-formed input that cannot be processed (duplicate ids, unknown
  // categories, unbalanced matrices, missing mAP).
  AXLE_STATUS_INPUT = 5,
  // Statistical preconditions not met (ties for the exact test, zero
  // variance, no critical value).
  AXLE_STATUS_STATISTICS = 6,
  AXLE_STATUS_INTERNAL = 7,
  AXLE_STATUS_PANIC = 8,
} AxleStatus;

// Opaque loaded dataset.
typedef struct AxleDataset AxleDataset;

// Opaque experiment matrix.
typedef struct AxleMatrix AxleMatrix;

// Normalized center-format box.
typedef struct AxleBox {
  double cx;
  double cy;
  double w;
  double h;
} AxleBox;

typedef struct AxleCounts {
  uint64_t true_positives;
  uint64_t false_positives;
  uint64_t false_negatives;
} AxleCounts;

// Percentages rounded half-up to two decimals.
typedef struct AxleMetrics {
  double recall_pct;
  double precision_pct;
  double f1_pct;
  // A zero denominator was reported as 0.
  bool degenerate;
} AxleMetrics;

typedef struct AxleUTest {
  size_t n1;
  size_t n2;
  // U of the first sample.
  double u1;
  double u2;
  // min(u1, u2)
  double u;
  double p_two_tailed;
  enum AxlePMethod p_method;
  bool has_critical_value;
  uint32_t critical_value;
  double alpha;
  enum AxleDecision decision;
} AxleUTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *axle_last_error_message(void);

// Loads a dataset manifest and every annotation file it lists.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AxleStatus axle_dataset_load(const char *path, struct AxleDataset **out);

// # Safety
// `ds` must come from [`axle_dataset_load`] and not be used afterwards.
void axle_dataset_free(struct AxleDataset *ds);

// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum AxleStatus axle_dataset_image_count(const struct AxleDataset *ds, size_t *out);

// Ground-truth objects of one category (0 when the category has none).
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum AxleStatus axle_dataset_object_count(const struct AxleDataset *ds,
                                          uint32_t category_id,
                                          size_t *out);

// # Safety
// `out` must be writable.
enum AxleStatus axle_iou(struct AxleBox a, struct AxleBox b, double *out);

// TP/FP/FN summed over all images and categories.
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum AxleStatus axle_evaluate(const struct AxleDataset *ds,
                              double iou_threshold,
                              double confidence_threshold,
                              struct AxleCounts *out);

// AP of one category over all detections in the dataset.
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum AxleStatus axle_average_precision(const struct AxleDataset *ds,
                                       uint32_t category_id,
                                       double iou_threshold,
                                       enum AxleInterpolation interpolation,
                                       double *out);

// # Safety
// `out` must be writable.
enum AxleStatus axle_metrics_from_counts(struct AxleCounts counts, struct AxleMetrics *out);

// Two-tailed Mann-Whitney U test of sample `a` against sample `b`.
//
// # Safety
// `a` and `b` must point to `n1` and `n2` readable doubles; `out` must be
// writable.
enum AxleStatus axle_mann_whitney(const double *a,
                                  size_t n1,
                                  const double *b,
                                  size_t n2,
                                  double alpha,
                                  struct AxleUTest *out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AxleStatus axle_matrix_load(const char *path, struct AxleMatrix **out);

// # Safety
// `m` must come from [`axle_matrix_load`] and not be used afterwards.
void axle_matrix_free(struct AxleMatrix *m);

// # Safety
// `m` must be a live matrix handle; `out` must be writable.
enum AxleStatus axle_matrix_row_count(const struct AxleMatrix *m, size_t *out);

// Renders the full report (metrics plus both hypothesis batteries).
//
// CSV output consists of several files (`metrics.csv`,
// `hypothesis_tests.csv`, `series.csv`); `file_name` selects one. Pass
// NULL to get the first file in name order. The string written to `out`
// must be released with [`axle_string_free`].
//
// # Safety
// `m` must be a live matrix handle, `file_name` NULL or NUL-terminated,
// `out` writable.
enum AxleStatus axle_report_render(const struct AxleMatrix *m,
                                   double alpha,
                                   enum AxleFormat format,
                                   const char *file_name,
                                   char **out);

// # Safety
// `s` must come from this library and not be used afterwards.
void axle_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AXLE_EVAL_H */
