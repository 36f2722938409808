#ifndef FEDSIM_H
#define FEDSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum FedsimStatus {
  FEDSIM_STATUS_OK = 0,
  FEDSIM_STATUS_NULL_POINTER = 1,
  FEDSIM_STATUS_INVALID_ARGUMENT = 2,
  FEDSIM_STATUS_CONFIG = 3,
  FEDSIM_STATUS_IO = 4,
  FEDSIM_STATUS_DATA = 5,
  FEDSIM_STATUS_INTERNAL = 6,
} FedsimStatus;

// Training or test examples.
typedef struct FedsimDataset FedsimDataset;

// A parsed experiment file.
typedef struct FedsimExperiment FedsimExperiment;

// The outcome of one run.
typedef struct FedsimRun FedsimRun;

// Metrics after one round or relay visit.
typedef struct FedsimRoundRecord {
  uint64_t round;
  double accuracy;
  double loss;
  uint64_t bytes_up;
  uint64_t bytes_down;
  double sim_time;
} FedsimRoundRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *fedsim_last_error_message(void);

// Centralized over federated training time for `N = k_n / k_s`.
//
// # Safety
// `ratio` must be null or point to writable memory.
enum FedsimStatus fedsim_time_ratio(double k_n,
                                    double k_s,
                                    size_t agencies,
                                    double model_reduction,
                                    double *ratio);

// Gaussian-blob dataset with `classes * per_class` examples.
//
// # Safety
// `dataset` must be null or point to writable memory.
enum FedsimStatus fedsim_dataset_synthetic(size_t classes,
                                           size_t per_class,
                                           size_t dim,
                                           uint64_t seed,
                                           struct FedsimDataset **dataset);

// Loads an IDX image/label file pair.
//
// # Safety
// Paths must be null or nul-terminated; `dataset` must be null or point
// to writable memory.
enum FedsimStatus fedsim_dataset_load_idx(const char *images,
                                          const char *labels,
                                          struct FedsimDataset **dataset);

// Number of examples, or 0 for null.
//
// # Safety
// `dataset` must be null or a live handle.
size_t fedsim_dataset_len(const struct FedsimDataset *dataset);

// Features per example, or 0 for null.
//
// # Safety
// `dataset` must be null or a live handle.
size_t fedsim_dataset_dim(const struct FedsimDataset *dataset);

// # Safety
// `dataset` must be null or a handle not yet freed.
void fedsim_dataset_free(struct FedsimDataset *dataset);

// Parses an experiment file.
//
// # Safety
// `path` must be null or nul-terminated; `experiment` must be null or
// point to writable memory.
enum FedsimStatus fedsim_experiment_load(const char *path, struct FedsimExperiment **experiment);

// Replaces the experiment seed.
//
// # Safety
// `experiment` must be null or a live handle.
enum FedsimStatus fedsim_experiment_set_seed(struct FedsimExperiment *experiment, uint64_t seed);

// Loads the experiment's data and runs it.
//
// # Safety
// `experiment` must be null or a live handle; `run` must be null or point
// to writable memory.
enum FedsimStatus fedsim_experiment_run(const struct FedsimExperiment *experiment,
                                        struct FedsimRun **run);

// Runs the experiment's settings on caller-supplied data.
//
// # Safety
// Handles must be null or live; `run` must be null or point to writable
// memory.
enum FedsimStatus fedsim_experiment_run_on(const struct FedsimExperiment *experiment,
                                           const struct FedsimDataset *train,
                                           const struct FedsimDataset *test,
                                           struct FedsimRun **run);

// # Safety
// `experiment` must be null or a handle not yet freed.
void fedsim_experiment_free(struct FedsimExperiment *experiment);

// Number of recorded rounds, or 0 for null.
//
// # Safety
// `run` must be null or a live handle.
size_t fedsim_run_round_count(const struct FedsimRun *run);

// Copies round `index` (0-based) into `record`.
//
// # Safety
// `run` must be null or a live handle; `record` must be null or point to
// writable memory.
enum FedsimStatus fedsim_run_round(const struct FedsimRun *run,
                                   size_t index,
                                   struct FedsimRoundRecord *record);

// Test accuracy of the final model, or NaN for null.
//
// # Safety
// `run` must be null or a live handle.
double fedsim_run_final_accuracy(const struct FedsimRun *run);

// Bytes moved during the run, or 0 for null.
//
// # Safety
// `run` must be null or a live handle.
uint64_t fedsim_run_total_bytes(const struct FedsimRun *run);

// Writes `rounds.csv` and `summary.csv` into an existing directory.
//
// # Safety
// `run` must be null or a live handle; `dir` must be null or
// nul-terminated.
enum FedsimStatus fedsim_run_write_csv(const struct FedsimRun *run, const char *dir);

// # Safety
// `run` must be null or a handle not yet freed.
void fedsim_run_free(struct FedsimRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDSIM_H */
