#ifndef SPEECH_AUGMENT_H
#define SPEECH_AUGMENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SaStatus {
  SA_STATUS_OK = 0,
  SA_STATUS_NULL_POINTER = 1,
  SA_STATUS_INVALID_UTF8 = 2,
  SA_STATUS_PANIC = 3,
  SA_STATUS_AUDIO = 10,
  SA_STATUS_SPECTRAL = 11,
  SA_STATUS_FEATURE_FILE = 12,
  SA_STATUS_VTLP = 13,
  SA_STATUS_REVERB = 14,
  SA_STATUS_PITCH = 15,
  SA_STATUS_RATE = 16,
  SA_STATUS_EVAL = 17,
  SA_STATUS_OTHER = 99,
} SaStatus;

/**
 * Opaque mono audio clip.
 */
typedef struct SaClip SaClip;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sa_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sa_version(void);

/**
 * Copies `len` samples into a new clip.
 *
 * # Safety
 * `samples` must point to `len` readable doubles (it may be null when `len`
 * is 0); `out` must be writable.
 */
enum SaStatus sa_clip_new(const double *samples,
                          size_t len,
                          uint32_t sample_rate,
                          struct SaClip **out);

/**
 * Reads a WAV file, downmixed to mono at its native rate.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SaStatus sa_clip_load(const char *path, struct SaClip **out);

/**
 * Writes the clip as 16-bit PCM. `clipped` (may be null) receives the number
 * of samples that had to be clamped to full scale.
 *
 * # Safety
 * `clip` must be a live handle and `path` a NUL-terminated string.
 */
enum SaStatus sa_clip_save(const struct SaClip *clip, const char *path, size_t *clipped);

/**
 * # Safety
 * `clip` must be null or a handle not yet freed.
 */
void sa_clip_free(struct SaClip *clip);

/**
 * Sample count, or 0 for a null handle.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
size_t sa_clip_len(const struct SaClip *clip);

/**
 * Sample rate in Hz, or 0 for a null handle.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
uint32_t sa_clip_sample_rate(const struct SaClip *clip);

/**
 * Borrowed view of the samples, valid until the clip is freed.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
const double *sa_clip_samples(const struct SaClip *clip);

/**
 * # Safety
 * `clip` must be a live handle; `out` must be writable.
 */
enum SaStatus sa_resample(const struct SaClip *clip, uint32_t target_rate, struct SaClip **out);

/**
 * Vocal tract length perturbation with warp factor `alpha` in [0.9, 1.1].
 *
 * # Safety
 * `clip` must be a live handle; `out` must be writable.
 */
enum SaStatus sa_vtlp(const struct SaClip *clip, double alpha, struct SaClip **out);

/**
 * Pitch scaling by `beta` in [0.5, 2.0] with duration preserved.
 *
 * # Safety
 * `clip` must be a live handle; `out` must be writable.
 */
enum SaStatus sa_pitch(const struct SaClip *clip, double beta, struct SaClip **out);

/**
 * Constant speaking-rate change; the output lasts `factor` times as long.
 *
 * # Safety
 * `clip` must be a live handle; `out` must be writable.
 */
enum SaStatus sa_rate(const struct SaClip *clip, double factor, struct SaClip **out);

/**
 * Time-warps `clip` to follow the speaking rate of `target`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum SaStatus sa_match_rate(const struct SaClip *clip,
                            const struct SaClip *target,
                            struct SaClip **out);

/**
 * Convolves with an impulse response clip (same sample rate), keeping the tail.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum SaStatus sa_reverb(const struct SaClip *clip, const struct SaClip *rir, struct SaClip **out);

/**
 * Impulse response of the default room with seeded source/microphone jitter.
 *
 * # Safety
 * `out` must be writable.
 */
enum SaStatus sa_rir_default(uint64_t seed, struct SaClip **out);

/**
 * Shoebox-room impulse response. `dimensions`, `source` and `mic` point to
 * three doubles (metres); `reflection` to six wall coefficients ordered
 * x=0, x=Lx, y=0, y=Ly, z=0, z=Lz. Speed of sound is 343 m/s.
 *
 * # Safety
 * Array pointers must reference the stated number of doubles; `out` must be
 * writable.
 */
enum SaStatus sa_rir(const double *dimensions,
                     const double *source,
                     const double *mic,
                     const double *reflection,
                     uint32_t max_order,
                     uint32_t sample_rate,
                     struct SaClip **out);

/**
 * Phone error rate (percent) of a space-separated hypothesis against a
 * space-separated reference.
 *
 * # Safety
 * Both strings must be NUL-terminated; `out` must be writable.
 */
enum SaStatus sa_phone_error_rate(const char *reference, const char *hypothesis, double *out);

/**
 * Extracts mel-cepstra and F0 from a 16 kHz clip into an MCP1 file.
 *
 * # Safety
 * `clip` must be a live handle and `path` a NUL-terminated string.
 */
enum SaStatus sa_features_extract(const struct SaClip *clip, const char *path);

/**
 * Resynthesizes a waveform from an MCP1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SaStatus sa_features_synthesize(const char *path, struct SaClip **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPEECH_AUGMENT_H */
