#ifndef OPCLASS_H
#define OPCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 4 match the command-line exit codes.
 */
typedef enum OpcStatus {
  OPC_STATUS_OK = 0,
  OPC_STATUS_NULL_POINTER = 1,
  OPC_STATUS_INVALID_ARGUMENT = 2,
  OPC_STATUS_DATA_ERROR = 3,
  OPC_STATUS_NUMERIC_ERROR = 4,
  OPC_STATUS_BUFFER_TOO_SMALL = 5,
  OPC_STATUS_PANIC = 6,
} OpcStatus;

typedef struct OpcClassifier OpcClassifier;

typedef struct OpcDataset OpcDataset;

typedef struct OpcReducer OpcReducer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next failing call.
 */
const char *opc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *opc_version(void);

/**
 * Loads a dataset CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OpcStatus opc_dataset_load(const char *path, struct OpcDataset **out);

/**
 * Generates a synthetic corpus.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum OpcStatus opc_dataset_synth(size_t n_minority,
                                 size_t n_majority,
                                 size_t n_opcodes,
                                 double separation,
                                 uint64_t seed,
                                 struct OpcDataset **out);

/**
 * # Safety
 * `dataset` must come from this library and not be used afterwards. NULL is ignored.
 */
void opc_dataset_free(struct OpcDataset *dataset);

/**
 * Row count, 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t opc_dataset_rows(const struct OpcDataset *dataset);

/**
 * Column count, 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t opc_dataset_cols(const struct OpcDataset *dataset);

/**
 * Copies the feature matrix, row-major, into `buf` (at least rows × cols values).
 *
 * # Safety
 * `dataset` must be a live handle and `buf` writable for `len` values.
 */
enum OpcStatus opc_dataset_matrix(const struct OpcDataset *dataset, double *buf, size_t len);

/**
 * Copies the labels (1 = malware, 0 = benign) into `buf` (at least rows values).
 *
 * # Safety
 * `dataset` must be a live handle and `buf` writable for `len` bytes.
 */
enum OpcStatus opc_dataset_labels(const struct OpcDataset *dataset, uint8_t *buf, size_t len);

/**
 * Loads a fitted reducer file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OpcStatus opc_reducer_load(const char *path, struct OpcReducer **out);

/**
 * # Safety
 * `reducer` must come from this library and not be used afterwards. NULL is ignored.
 */
void opc_reducer_free(struct OpcReducer *reducer);

/**
 * Features per output row, 0 for NULL.
 *
 * # Safety
 * `reducer` must be NULL or a live handle.
 */
size_t opc_reducer_output_width(const struct OpcReducer *reducer);

/**
 * Reduces a row-major `rows × cols` matrix into `out` (rows × output width values).
 *
 * # Safety
 * `input` must be readable for rows × cols values and `out` writable for `out_len` values.
 */
enum OpcStatus opc_reducer_apply(const struct OpcReducer *reducer,
                                 const double *input,
                                 size_t rows,
                                 size_t cols,
                                 double *out,
                                 size_t out_len);

/**
 * Loads a trained classifier file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OpcStatus opc_classifier_load(const char *path, struct OpcClassifier **out);

/**
 * # Safety
 * `classifier` must come from this library and not be used afterwards. NULL is ignored.
 */
void opc_classifier_free(struct OpcClassifier *classifier);

/**
 * Expected features per row, 0 for NULL.
 *
 * # Safety
 * `classifier` must be NULL or a live handle.
 */
size_t opc_classifier_input_width(const struct OpcClassifier *classifier);

/**
 * Scores a row-major `rows × cols` matrix. Writes the malware probability
 * of each row to `proba` and, unless `labels` is NULL, the 0/1 decision.
 *
 * # Safety
 * `input` must be readable for rows × cols values; `proba` and `labels`
 * (when not NULL) writable for `rows` values.
 */
enum OpcStatus opc_classifier_predict(const struct OpcClassifier *classifier,
                                      const double *input,
                                      size_t rows,
                                      size_t cols,
                                      double *proba,
                                      uint8_t *labels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPCLASS_H */
