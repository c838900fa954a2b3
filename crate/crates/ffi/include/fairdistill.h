/* C interface for the fairdistill toolkit. */

#ifndef FAIRDISTILL_H
#define FAIRDISTILL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = -1,
  FD_STATUS_INVALID_ARGUMENT = -2,
  FD_STATUS_UNDEFINED_METRIC = -3,
  FD_STATUS_IO_ERROR = -4,
  FD_STATUS_INTERNAL_ERROR = -5,
} FdStatus;

// Opaque classification prediction set.
typedef struct FdPredictionSet FdPredictionSet;

// Derived fairness metrics of a classification prediction set.
typedef struct FdClassificationReport {
  double overall_auc;
  double worst_case_auc;
  double auc_gap;
  double es_auc;
  double mean_psd;
  double max_psd;
  size_t n_groups;
} FdClassificationReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a NUL-terminated static string.
const char *fd_version(void);

// Detail message for the most recent error on this thread. Valid until
// the next failing call on the same thread.
const char *fd_last_error_message(void);

// AUC as the Mann–Whitney statistic (ties credited 0.5). Labels are 0/1.
//
// # Safety
// `scores` and `labels` must point to `len` readable elements; `out` must
// be a valid writable pointer.
enum FdStatus fd_auc(const double *scores, const uint8_t *labels, size_t len, double *out);

// Exact 1-Wasserstein distance between two empirical distributions.
//
// # Safety
// `a`/`b` must point to `a_len`/`b_len` readable doubles; `out` writable.
enum FdStatus fd_wasserstein_1d(const double *a,
                                size_t a_len,
                                const double *b,
                                size_t b_len,
                                double *out);

// Equity-scaled AUC: overall / (1 + mean |overall − group|).
//
// # Safety
// `group_values` must point to `n_groups` readable doubles; `out` writable.
enum FdStatus fd_es_auc(double overall, const double *group_values, size_t n_groups, double *out);

// Equity-scaled overlap score: overall / (1 + Δ) with Δ the summed
// per-group discrepancy (Dice/IoU convention).
//
// # Safety
// `group_values` must point to `n_groups` readable doubles; `out` writable.
enum FdStatus fd_es_overlap(double overall,
                            const double *group_values,
                            size_t n_groups,
                            double *out);

// Performance-scaled disparities: population std of the group values and
// their range, both divided by the overall score.
//
// # Safety
// `group_values` must point to `n_groups` readable doubles; both out
// pointers must be writable.
enum FdStatus fd_psd(double overall,
                     const double *group_values,
                     size_t n_groups,
                     double *out_mean_psd,
                     double *out_max_psd);

// Friedman test over a row-major tasks × algorithms score matrix.
//
// # Safety
// `scores` must point to `n_tasks * n_algorithms` readable doubles; both
// out pointers must be writable.
enum FdStatus fd_friedman(const double *scores,
                          size_t n_tasks,
                          size_t n_algorithms,
                          bool higher_is_better,
                          double *out_chi2,
                          double *out_p);

// Nemenyi critical difference for k algorithms over N tasks at
// alpha ∈ {0.05, 0.10}.
//
// # Safety
// `out` must be a valid writable pointer.
enum FdStatus fd_nemenyi_cd(size_t n_algorithms, size_t n_tasks, double alpha, double *out);

// Creates an empty prediction set. Free with [`fd_prediction_set_free`].
struct FdPredictionSet *fd_prediction_set_new(void);

// Destroys a prediction set. NULL is ignored.
//
// # Safety
// `set` must be NULL or a pointer from [`fd_prediction_set_new`] that has
// not been freed yet.
void fd_prediction_set_free(struct FdPredictionSet *set);

// Appends one prediction (score in [0,1], binary label, cohort id).
//
// # Safety
// `set` must be a live pointer from [`fd_prediction_set_new`].
enum FdStatus fd_prediction_set_push(struct FdPredictionSet *set,
                                     double score,
                                     uint8_t label,
                                     uint32_t attribute);

// Number of predictions pushed so far.
//
// # Safety
// `set` must be NULL or a live pointer from [`fd_prediction_set_new`].
size_t fd_prediction_set_len(const struct FdPredictionSet *set);

// Full fairness report over the prediction set.
//
// # Safety
// `set` must be a live pointer; `out` must be writable.
enum FdStatus fd_prediction_set_report(const struct FdPredictionSet *set,
                                       struct FdClassificationReport *out);

// AUC restricted to one cohort of the prediction set.
//
// # Safety
// `set` must be a live pointer; `out` must be writable.
enum FdStatus fd_prediction_set_group_auc(const struct FdPredictionSet *set,
                                          uint32_t attribute,
                                          double *out);

// Generates a synthetic benchmark into `out_dir`. `spec_json` is either
// NULL (defaults) or a JSON object with generator-spec fields.
//
// # Safety
// `spec_json` must be NULL or a NUL-terminated string; `out_dir` must be a
// NUL-terminated string.
enum FdStatus fd_generate(const char *spec_json, const char *out_dir);

// Trains `method` ("erm", "fis", or "fairdi") on a dataset CSV, writing
// checkpoints and records under `out_dir`.
//
// # Safety
// `dataset_csv`, `method`, and `out_dir` must be NUL-terminated strings.
enum FdStatus fd_train(const char *dataset_csv,
                       const char *method,
                       const char *out_dir,
                       uint64_t seed,
                       size_t max_epochs);

// Evaluates a classification predictions CSV into report files under
// `out_dir`.
//
// # Safety
// `predictions_csv` and `out_dir` must be NUL-terminated strings.
enum FdStatus fd_evaluate_predictions(const char *predictions_csv, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRDISTILL_H */
