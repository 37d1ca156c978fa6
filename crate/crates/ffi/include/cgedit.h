#ifndef CGEDIT_H
#define CGEDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CGEDIT_STATUS_OK = 0,
  CGEDIT_STATUS_NULL_POINTER = 1,
  CGEDIT_STATUS_INVALID_UTF8 = 2,
  CGEDIT_STATUS_IO = 3,
  CGEDIT_STATUS_PARSE = 4,
  CGEDIT_STATUS_INVALID_INPUT = 5,
  CGEDIT_STATUS_NOT_FOUND = 6,
  CGEDIT_STATUS_CONFLICT = 7,
  CGEDIT_STATUS_PANIC = 99,
} CgeditStatus;

typedef struct CgeditCorpus CgeditCorpus;

typedef struct CgeditIndex CgeditIndex;

typedef struct CgeditModel CgeditModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. Free with
 * `cgedit_string_free`.
 */
char *cgedit_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void cgedit_string_free(char *s);

/**
 * Static version string; do not free.
 */
const char *cgedit_version(void);

/**
 * Loads a JSONL utterance file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
CgeditStatus cgedit_corpus_load(const char *path, bool uncased, CgeditCorpus **out);

/**
 * # Safety
 * `corpus` must be NULL or a handle from `cgedit_corpus_load`.
 */
uintptr_t cgedit_corpus_len(const CgeditCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle from `cgedit_corpus_load`, freed once.
 */
void cgedit_corpus_free(CgeditCorpus *corpus);

/**
 * Builds the default 2/3/4-gram index.
 *
 * # Safety
 * `corpus` must be a live corpus handle; `out` a valid pointer.
 */
CgeditStatus cgedit_index_build(const CgeditCorpus *corpus, CgeditIndex **out);

/**
 * # Safety
 * `dir` must be a NUL-terminated string; `out` a valid pointer.
 */
CgeditStatus cgedit_index_load(const char *dir, CgeditIndex **out);

/**
 * # Safety
 * `index` must be a live index handle; `dir` a NUL-terminated string.
 */
CgeditStatus cgedit_index_save(const CgeditIndex *index, const char *dir);

/**
 * Corpus count of a space-separated n-gram.
 *
 * # Safety
 * `index` must be a live index handle; `ngram` a NUL-terminated string;
 * `out` a valid pointer.
 */
CgeditStatus cgedit_index_count(const CgeditIndex *index, const char *ngram, uint64_t *out);

/**
 * # Safety
 * `index` must be NULL or an index handle, freed once.
 */
void cgedit_index_free(CgeditIndex *index);

/**
 * Candidate edits for one seed as a JSON array, in shuffled order.
 *
 * # Safety
 * `index` must be a live index handle; string arguments NUL-terminated;
 * `out_json` a valid pointer. Free the result with `cgedit_string_free`.
 */
CgeditStatus cgedit_generate(const CgeditIndex *index,
                             const char *seed_id,
                             const char *feature_id,
                             const char *text,
                             uint64_t rng_seed,
                             char **out_json);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
CgeditStatus cgedit_model_load(const char *path, CgeditModel **out);

/**
 * Probability that `text` exhibits `feature_id`.
 *
 * # Safety
 * `model` must be a live model handle; strings NUL-terminated; `out` valid.
 */
CgeditStatus cgedit_model_score(const CgeditModel *model,
                                const char *feature_id,
                                const char *text,
                                double *out);

/**
 * # Safety
 * `model` must be NULL or a model handle, freed once.
 */
void cgedit_model_free(CgeditModel *model);

/**
 * # Safety
 * `scores` and `labels` must point to `n` elements; `out` must be valid.
 */
CgeditStatus cgedit_roc_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

/**
 * # Safety
 * `scores` and `labels` must point to `n` elements; `out` must be valid.
 */
CgeditStatus cgedit_average_precision(const double *scores,
                                      const uint8_t *labels,
                                      uintptr_t n,
                                      double *out);

/**
 * Precision among the top `k`; missing ranks count as misses when `n < k`.
 *
 * # Safety
 * `scores` and `labels` must point to `n` elements; `out` must be valid.
 */
CgeditStatus cgedit_precision_at_k(const double *scores,
                                   const uint8_t *labels,
                                   uintptr_t n,
                                   uintptr_t k,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGEDIT_H */
