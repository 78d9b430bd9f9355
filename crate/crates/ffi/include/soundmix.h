#ifndef SOUNDMIX_H
#define SOUNDMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned across the ABI.
 */
typedef enum SoundmixStatus {
  SOUNDMIX_STATUS_OK = 0,
  SOUNDMIX_STATUS_NULL_POINTER = 1,
  SOUNDMIX_STATUS_INVALID_ARGUMENT = 2,
  SOUNDMIX_STATUS_IO = 3,
  SOUNDMIX_STATUS_BAD_FORMAT = 4,
  SOUNDMIX_STATUS_BUFFER_TOO_SMALL = 5,
  SOUNDMIX_STATUS_INTERNAL = 6,
} SoundmixStatus;

/**
 * A loaded classifier. Opaque to C callers.
 */
typedef struct SoundmixModel SoundmixModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *soundmix_last_error(void);

/**
 * Loads a checkpoint written by `soundmix train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SoundmixStatus soundmix_model_load(const char *path, struct SoundmixModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`soundmix_model_load`] and not be used again.
 */
void soundmix_model_free(struct SoundmixModel *model);

/**
 * Number of output classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t soundmix_model_num_classes(const struct SoundmixModel *model);

/**
 * Decision threshold stored with the model, or NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
double soundmix_model_threshold(const struct SoundmixModel *model);

/**
 * Name of class `index`, owned by the model. Null when out of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *soundmix_model_class_name(const struct SoundmixModel *model, size_t index);

/**
 * Class probabilities for the first 4 s of a WAV file.
 *
 * # Safety
 * `path` must be NUL-terminated; `probs` must hold `capacity` doubles.
 */
enum SoundmixStatus soundmix_predict_wav(const struct SoundmixModel *model,
                                         const char *path,
                                         double *probs,
                                         size_t capacity);

/**
 * Class probabilities for mono samples at `sample_rate`. The signal is
 * resampled to 44.1 kHz and cut or padded to 4 s.
 *
 * # Safety
 * `samples` must hold `len` doubles; `probs` must hold `capacity` doubles.
 */
enum SoundmixStatus soundmix_predict_samples(const struct SoundmixModel *model,
                                             const double *samples,
                                             size_t len,
                                             uint32_t sample_rate,
                                             double *probs,
                                             size_t capacity);

/**
 * Log-Mel spectrogram of mono samples, written row-major as
 * `[mels, frames]`. `rows` and `cols` always receive the shape, so a call
 * with `capacity == 0` sizes the buffer.
 *
 * # Safety
 * `samples` must hold `len` doubles, `out` must hold `capacity` doubles
 * (or be null when `capacity` is 0), and `rows`/`cols` must be writable.
 */
enum SoundmixStatus soundmix_log_mel(const double *samples,
                                     size_t len,
                                     uint32_t sample_rate,
                                     double *out,
                                     size_t capacity,
                                     size_t *rows,
                                     size_t *cols);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SOUNDMIX_H */
