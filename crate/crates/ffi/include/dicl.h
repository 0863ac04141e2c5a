#ifndef DICL_H
#define DICL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DiclStatus {
  DICL_STATUS_OK = 0,
  DICL_STATUS_NULL_POINTER = 1,
  DICL_STATUS_INVALID_ARGUMENT = 2,
  DICL_STATUS_INVALID_UTF8 = 3,
  DICL_STATUS_IO = 4,
  DICL_STATUS_INVALID_DATA = 5,
  DICL_STATUS_NUMERIC = 6,
  DICL_STATUS_BUFFER_TOO_SMALL = 7,
  DICL_STATUS_PANIC = 8,
} DiclStatus;

// A loaded dataset with its three splits.
typedef struct DiclDataset DiclDataset;

// A fitted tf-idf model.
typedef struct DiclTfIdf DiclTfIdf;

typedef struct DiclTTest {
  double t;
  size_t df;
  double p;
  bool significant;
} DiclTTest;

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *dicl_last_error(void);

// Library version as a static NUL-terminated string.
const char *dicl_version(void);

// Fits a tf-idf model on `n` training texts.
//
// # Safety
// `texts` must hold `n` NUL-terminated strings and `out` must be writable.
enum DiclStatus dicl_tfidf_fit(const char *const *texts, size_t n, struct DiclTfIdf **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from `dicl_tfidf_fit` and not be used afterwards.
void dicl_tfidf_free(struct DiclTfIdf *model);

// # Safety
// `model` and `out` must be valid.
enum DiclStatus dicl_tfidf_vocabulary_size(const struct DiclTfIdf *model, size_t *out);

// Writes the sparse vector of `text` as parallel `indices` / `weights`
// arrays of capacity `cap`. `len` receives the number of non-zero entries;
// when it exceeds `cap` nothing is written and `BufferTooSmall` is returned,
// so a call with `cap = 0` queries the size.
//
// # Safety
// `indices` and `weights` must be valid for `cap` writes.
enum DiclStatus dicl_tfidf_vectorize(const struct DiclTfIdf *model,
                                     const char *text,
                                     size_t *indices,
                                     double *weights,
                                     size_t cap,
                                     size_t *len);

// Cosine similarity between the tf-idf vectors of two texts.
//
// # Safety
// All pointers must be valid.
enum DiclStatus dicl_tfidf_similarity(const struct DiclTfIdf *model,
                                      const char *a,
                                      const char *b,
                                      double *out);

// Cosine similarity of two dense vectors of length `dim`.
//
// # Safety
// `a` and `b` must be valid for `dim` reads.
enum DiclStatus dicl_cosine(const double *a, const double *b, size_t dim, double *out);

// Greedy MMR over a pool of `m` candidates.
//
// `ids[i]` and `query_sims[i]` describe candidate `i`; `pairwise` is the
// row-major `m x m` similarity matrix in the same order. Up to
// `min(k, m)` ids are written to `out_ids` (capacity `k`) in selection
// order and their count to `out_len`.
//
// # Safety
// Array arguments must be valid for the sizes above.
enum DiclStatus dicl_mmr_select(const size_t *ids,
                                const double *query_sims,
                                const double *pairwise,
                                size_t m,
                                double alpha,
                                size_t k,
                                size_t *out_ids,
                                size_t *out_len);

// Macro-F1 over `n` predictions with labels `0..n_classes`. A negative
// prediction marks an answer that could not be parsed.
//
// # Safety
// `gold` and `predicted` must be valid for `n` reads.
enum DiclStatus dicl_macro_f1(const int32_t *gold,
                              const int32_t *predicted,
                              size_t n,
                              size_t n_classes,
                              double *out);

// Two-sided paired t-test of `a` against `b`.
//
// # Safety
// `a` and `b` must be valid for `n` reads.
enum DiclStatus dicl_paired_t_test(const double *a,
                                   const double *b,
                                   size_t n,
                                   struct DiclTTest *out);

// Relative change of `dicl_f1` over `baseline_f1`, in percent.
//
// # Safety
// `out` must be writable.
enum DiclStatus dicl_delta_percent(double dicl_f1, double baseline_f1, double *out);

// Loads a dataset from its manifest file.
//
// # Safety
// `manifest_path` must be a NUL-terminated string and `out` writable.
enum DiclStatus dicl_dataset_load(const char *manifest_path, struct DiclDataset **out);

// Releases a dataset. Null is ignored.
//
// # Safety
// `dataset` must come from `dicl_dataset_load` and not be used afterwards.
void dicl_dataset_free(struct DiclDataset *dataset);

// Number of examples in a split: 0 train, 1 validation, 2 test.
//
// # Safety
// `dataset` and `out` must be valid.
enum DiclStatus dicl_dataset_split_len(const struct DiclDataset *dataset,
                                       uint32_t split,
                                       size_t *out);

// Number of labels in the dataset's label set.
//
// # Safety
// `dataset` and `out` must be valid.
enum DiclStatus dicl_dataset_label_count(const struct DiclDataset *dataset, size_t *out);

#endif  /* DICL_H */
