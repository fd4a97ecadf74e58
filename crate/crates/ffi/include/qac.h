#ifndef QAC_H
#define QAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QacStatus {
  QAC_STATUS_OK = 0,
  QAC_STATUS_INVALID_ARGUMENT = 1,
  QAC_STATUS_IO = 2,
  QAC_STATUS_FORMAT = 3,
  QAC_STATUS_LAYOUT_MISMATCH = 4,
  QAC_STATUS_UNAVAILABLE = 5,
  QAC_STATUS_INTERNAL = 6,
  QAC_STATUS_PANIC = 7,
} QacStatus;

typedef enum QacDevice {
  QAC_DEVICE_IOS_APP = 0,
  QAC_DEVICE_ANDROID_APP = 1,
  QAC_DEVICE_DESKTOP_BROWSER = 2,
  QAC_DEVICE_MOBILE_BROWSER = 3,
} QacDevice;

/**
 * A loaded index and model.
 */
typedef struct QacEngine QacEngine;

/**
 * The ranked suggestions of one request.
 */
typedef struct QacSuggestions QacSuggestions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *qac_last_error(void);

/**
 * Load an index and model file into a new engine.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum QacStatus qac_engine_open(const char *index_path,
                               const char *model_path,
                               struct QacEngine **out);

/**
 * Re-read the engine's files and swap them in atomically.
 *
 * # Safety
 * `engine` must come from [`qac_engine_open`] and not be used concurrently
 * with [`qac_engine_free`].
 */
enum QacStatus qac_engine_reload(struct QacEngine *engine);

/**
 * Model version tag; owned by the engine.
 *
 * # Safety
 * `engine` must be a live engine or null.
 */
const char *qac_engine_model_version(const struct QacEngine *engine);

/**
 * # Safety
 * `engine` must come from [`qac_engine_open`] (or be null) and not be used
 * afterwards.
 */
void qac_engine_free(struct QacEngine *engine);

/**
 * Rank suggestions for `prefix`. `previous_query` may be null; `month` 0
 * means the current month; `limit` is at most 50.
 *
 * # Safety
 * `engine` must be live, strings NUL-terminated, `out` writable. The engine
 * may be shared across threads for this call.
 */
enum QacStatus qac_suggest(const struct QacEngine *engine,
                           const char *prefix,
                           enum QacDevice device,
                           const char *previous_query,
                           uint8_t month,
                           size_t limit,
                           struct QacSuggestions **out);

/**
 * Number of suggestions; 0 for null.
 *
 * # Safety
 * `s` must be live or null.
 */
size_t qac_suggestions_len(const struct QacSuggestions *s);

/**
 * Text of suggestion `i`, owned by `s`; null when out of range.
 *
 * # Safety
 * `s` must be live or null.
 */
const char *qac_suggestion_text(const struct QacSuggestions *s, size_t i);

/**
 * Score of suggestion `i`; NaN when out of range.
 *
 * # Safety
 * `s` must be live or null.
 */
double qac_suggestion_score(const struct QacSuggestions *s, size_t i);

/**
 * Whether suggestion `i` starts with the prefix; false when out of range.
 *
 * # Safety
 * `s` must be live or null.
 */
bool qac_suggestion_is_exact(const struct QacSuggestions *s, size_t i);

/**
 * # Safety
 * `s` must be live or null.
 */
uint64_t qac_suggestions_latency_micros(const struct QacSuggestions *s);

/**
 * # Safety
 * `s` must come from [`qac_suggest`] (or be null) and not be used
 * afterwards.
 */
void qac_suggestions_free(struct QacSuggestions *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QAC_H */
