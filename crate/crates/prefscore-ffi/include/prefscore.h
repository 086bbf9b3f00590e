#ifndef PREFSCORE_H
#define PREFSCORE_H

/* Generated from the prefscore-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function in this ABI.
 */
typedef enum PsStatus {
  /**
   * Success.
   */
  PS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PS_STATUS_INVALID_UTF8 = 2,
  /**
   * File could not be read or written.
   */
  PS_STATUS_IO = 3,
  /**
   * File contents could not be parsed.
   */
  PS_STATUS_PARSE = 4,
  /**
   * An input value or configuration violated an invariant.
   */
  PS_STATUS_INVALID_INPUT = 5,
  /**
   * An id was not found in the referenced set or table.
   */
  PS_STATUS_UNKNOWN_ID = 6,
  /**
   * The requested metric is mathematically undefined on these inputs.
   */
  PS_STATUS_METRIC_UNDEFINED = 7,
  /**
   * A remote endpoint or judge failed.
   */
  PS_STATUS_REMOTE = 8,
  /**
   * A credential environment variable is missing or empty.
   */
  PS_STATUS_CREDENTIAL = 9,
  /**
   * Artifacts from different configurations were mixed.
   */
  PS_STATUS_PROVENANCE = 10,
  /**
   * Too many pairwise queries were skipped for the run to be trusted.
   */
  PS_STATUS_TOO_MANY_SKIPS = 11,
  /**
   * A caller-supplied buffer is too small for the value.
   */
  PS_STATUS_BUFFER_TOO_SMALL = 12,
  /**
   * The library panicked; this is a bug in the library.
   */
  PS_STATUS_INTERNAL = 13,
} PsStatus;

/**
 * Opaque handle to a loaded essay collection.
 */
typedef struct PsEssaySet PsEssaySet;

/**
 * Opaque handle to fitted latent scores, in essay input order.
 */
typedef struct PsScoreTable PsScoreTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ps_version(void);

/**
 * Message for the most recent error on the calling thread.
 *
 * Returns a pointer to a NUL-terminated UTF-8 string (empty if no error has
 * occurred yet). The pointer is invalidated by the next library call made
 * from the same thread.
 */
const char *ps_last_error_message(void);

/**
 * Loads essays from `path` into a new handle stored in `*out`.
 *
 * The format is inferred from the extension: `.jsonl`/`.ndjson` is JSON
 * Lines (which may carry embeddings and gold scores), anything else is CSV
 * with an `id,prompt_id,text[,gold_score]` header.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid location to
 * store the handle. On success the caller owns `*out` and must release it
 * with [`ps_essay_set_free`].
 */
enum PsStatus ps_essay_set_load(const char *path, struct PsEssaySet **out);

/**
 * Number of essays in the set; 0 when `set` is null.
 *
 * # Safety
 * `set` must be null or a live pointer from [`ps_essay_set_load`].
 */
size_t ps_essay_set_len(const struct PsEssaySet *set);

/**
 * Releases a handle from [`ps_essay_set_load`]. Accepts null.
 *
 * # Safety
 * `set` must be null or an owned pointer from this library, freed once.
 */
void ps_essay_set_free(struct PsEssaySet *set);

/**
 * Fits latent scores for `set` from the judged pairs in `comparisons_path`
 * (JSON Lines, as written by the `prefscore generate` command) and stores a
 * new score-table handle in `*out`.
 *
 * `method` is `"ranknet"`, `"bt"`, or `"elo"`; each runs with its default
 * hyperparameters. `seed` drives the method's randomness (batch shuffling
 * and weight initialization for ranknet, record-order shuffling for elo; bt
 * is deterministic and ignores it). The ranknet method requires every essay
 * to carry an embedding, so it needs JSONL input with `embedding` fields.
 *
 * # Safety
 * Pointer arguments follow the same rules as [`ps_essay_set_load`]. On
 * success the caller owns `*out` and must release it with
 * [`ps_score_table_free`].
 */
enum PsStatus ps_fit_scores(const struct PsEssaySet *set,
                            const char *comparisons_path,
                            const char *method,
                            uint64_t seed,
                            struct PsScoreTable **out);

/**
 * Number of scored essays; 0 when `table` is null.
 *
 * # Safety
 * `table` must be null or a live pointer from [`ps_fit_scores`].
 */
size_t ps_score_table_len(const struct PsScoreTable *table);

/**
 * Looks up the latent score for `id` and stores it in `*out`.
 *
 * # Safety
 * Pointer arguments follow the same rules as [`ps_essay_set_load`].
 */
enum PsStatus ps_score_table_get(const struct PsScoreTable *table, const char *id, double *out);

/**
 * Latent score at position `index` (essay input order), stored in `*out`.
 *
 * # Safety
 * Pointer arguments follow the same rules as [`ps_essay_set_load`].
 */
enum PsStatus ps_score_table_value_at(const struct PsScoreTable *table, size_t index, double *out);

/**
 * Copies the essay id at position `index` into `buf` as a NUL-terminated
 * string. `buf_len` is the capacity of `buf` in bytes, including the NUL.
 *
 * # Safety
 * `buf` must point to at least `buf_len` writable bytes; other arguments
 * follow the same rules as [`ps_essay_set_load`].
 */
enum PsStatus ps_score_table_id_at(const struct PsScoreTable *table,
                                   size_t index,
                                   char *buf,
                                   size_t buf_len);

/**
 * Writes the table as a two-column CSV (`id,score`) to `path`.
 *
 * Scores are written with the shortest decimal representation that parses
 * back to the identical value.
 *
 * # Safety
 * Pointer arguments follow the same rules as [`ps_essay_set_load`].
 */
enum PsStatus ps_score_table_save_csv(const struct PsScoreTable *table, const char *path);

/**
 * Releases a handle from [`ps_fit_scores`]. Accepts null.
 *
 * # Safety
 * `table` must be null or an owned pointer from this library, freed once.
 */
void ps_score_table_free(struct PsScoreTable *table);

/**
 * Combines the two query orders of one pair into a position-debiased label,
 * stored in `*out`: if the reversed label mirrors the forward one the
 * forward label is kept, otherwise the pair collapses to a tie (0.5).
 *
 * Labels must be 0, 0.5, or 1.
 *
 * # Safety
 * `out` must be a valid location to store the result.
 */
enum PsStatus ps_debias(double c_ij, double c_ji, double *out);

/**
 * Quadratic weighted kappa between `pred` and `gold` (each `len` values),
 * where both must take values from the `levels` array (`levels_len`
 * ascending distinct values). Stores the result in `*out`.
 *
 * # Safety
 * `pred` and `gold` must point to `len` readable doubles, `levels` to
 * `levels_len` readable doubles, and `out` must be writable.
 */
enum PsStatus ps_qwk(const double *pred,
                     const double *gold,
                     size_t len,
                     const double *levels,
                     size_t levels_len,
                     double *out);

/**
 * Spearman rank correlation between `pred` and `gold` (each `len` values),
 * stored in `*out`. Undefined when either side is constant.
 *
 * # Safety
 * `pred` and `gold` must point to `len` readable doubles and `out` must be
 * writable.
 */
enum PsStatus ps_spearman(const double *pred, const double *gold, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREFSCORE_H */
