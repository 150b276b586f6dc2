#ifndef BLOCKER_H
#define BLOCKER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Zero is success; errors are negative and stable.
enum BlockerStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  BLOCKER_STATUS_OK = 0,
  BLOCKER_STATUS_NULL_ARGUMENT = -1,
  BLOCKER_STATUS_INVALID_UTF8 = -2,
  BLOCKER_STATUS_CONFIG = -3,
  BLOCKER_STATUS_DEGENERATE = -4,
  BLOCKER_STATUS_NUMERIC = -5,
  BLOCKER_STATUS_SIZE_MISMATCH = -6,
  BLOCKER_STATUS_ENROLLMENT = -7,
  BLOCKER_STATUS_PROTOCOL = -8,
  BLOCKER_STATUS_UNKNOWN_DEVICE = -9,
  BLOCKER_STATUS_NOT_ENROLLED = -10,
  BLOCKER_STATUS_PARSE = -11,
  BLOCKER_STATUS_IO = -12,
  BLOCKER_STATUS_BUFFER_TOO_SMALL = -13,
  BLOCKER_STATUS_PANIC = -14,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum BlockerStatus BlockerStatus;
#else
typedef int32_t BlockerStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

typedef struct BlockerBitstream BlockerBitstream;

typedef struct BlockerHelper BlockerHelper;

typedef struct BlockerModel BlockerModel;

typedef struct BlockerNetlist BlockerNetlist;

typedef struct BlockerPuf BlockerPuf;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *blocker_version(void);

// Length in bytes of the calling thread's last error message, without
// the terminating NUL; 0 if there is none.
size_t blocker_last_error_length(void);

// Copies the last error message, NUL-terminated, into `buf`.
//
// # Safety
// `buf` must point to `capacity` writable bytes.
BlockerStatus blocker_last_error_message(char *buf, size_t capacity);

// Creates a simulated arbiter PUF.
//
// # Safety
// `device_id` must be a NUL-terminated string; `out` must be writable.
BlockerStatus blocker_puf_new(const char *device_id,
                              size_t n_stages,
                              double noise_sigma,
                              uint64_t seed,
                              struct BlockerPuf **out);

// # Safety
// `puf` must come from [`blocker_puf_new`] and not be used afterwards.
void blocker_puf_free(struct BlockerPuf *puf);

// Evaluates one challenge with noise fixed by `seed`.
//
// # Safety
// `challenge` must hold `n_stages` bytes; `response` must be writable.
BlockerStatus blocker_puf_eval(const struct BlockerPuf *puf,
                               const uint8_t *challenge,
                               size_t n_stages,
                               uint64_t seed,
                               uint8_t *response);

// Collects `n_crps` noiseless CRPs from `puf` and trains a model.
//
// # Safety
// `puf` must be a live handle; `out` must be writable.
BlockerStatus blocker_model_train(const struct BlockerPuf *puf,
                                  size_t n_crps,
                                  uint64_t seed,
                                  struct BlockerModel **out);

// Held-out accuracy of a trained model (training accuracy when no
// CRPs were held out).
//
// # Safety
// `model` must be a live handle; `accuracy` must be writable.
BlockerStatus blocker_model_accuracy(const struct BlockerModel *model, double *accuracy);

// # Safety
// `challenge` must hold `n_stages` bytes; `response` must be writable.
BlockerStatus blocker_model_predict(const struct BlockerModel *model,
                                    const uint8_t *challenge,
                                    size_t n_stages,
                                    uint8_t *response);

// # Safety
// `model` must come from this library and not be used afterwards.
void blocker_model_free(struct BlockerModel *model);

// Parses and validates helper data.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
BlockerStatus blocker_helper_from_json(const char *json, struct BlockerHelper **out);

// # Safety
// `helper` must be a live handle; `key_len` must be writable.
BlockerStatus blocker_helper_key_len(const struct BlockerHelper *helper, size_t *key_len);

// Regenerates a key from `readings` feature vectors of length `dim`,
// stored row-major in `features`. One reading, or as many as the
// helper's ECC block length.
//
// # Safety
// `features` must hold `readings * dim` values; `key` must hold
// `capacity` bytes; `key_len` must be writable.
BlockerStatus blocker_regenerate_key(const struct BlockerHelper *helper,
                                     const double *features,
                                     size_t dim,
                                     size_t readings,
                                     uint8_t *key,
                                     size_t capacity,
                                     size_t *key_len);

// # Safety
// `helper` must come from this library and not be used afterwards.
void blocker_helper_free(struct BlockerHelper *helper);

// The bundled 4x4-bit multiplier netlist.
//
// # Safety
// `out` must be writable.
BlockerStatus blocker_netlist_sample_multiplier(struct BlockerNetlist **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
BlockerStatus blocker_netlist_from_json(const char *json, struct BlockerNetlist **out);

// Evaluates an unlocked netlist.
//
// # Safety
// `inputs` must hold `n_inputs` bytes and `outputs` `capacity` bytes.
BlockerStatus blocker_netlist_evaluate(const struct BlockerNetlist *netlist,
                                       const uint8_t *inputs,
                                       size_t n_inputs,
                                       uint8_t *outputs,
                                       size_t capacity,
                                       size_t *n_outputs);

// Locks `netlist` under `key`.
//
// # Safety
// `key` must hold `key_len` bytes; `out` must be writable.
BlockerStatus blocker_obfuscate(const struct BlockerNetlist *netlist,
                                const uint8_t *key,
                                size_t key_len,
                                uint64_t seed,
                                struct BlockerBitstream **out);

// # Safety
// `netlist` must come from this library and not be used afterwards.
void blocker_netlist_free(struct BlockerNetlist *netlist);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
BlockerStatus blocker_bitstream_from_json(const char *json, struct BlockerBitstream **out);

// # Safety
// `bitstream` must be a live handle; `key_len` must be writable.
BlockerStatus blocker_bitstream_key_len(const struct BlockerBitstream *bitstream, size_t *key_len);

// Evaluates a locked bitstream under `key`.
//
// # Safety
// `key`, `inputs` and `outputs` must hold `key_len`, `n_inputs` and
// `capacity` bytes.
BlockerStatus blocker_bitstream_evaluate(const struct BlockerBitstream *bitstream,
                                         const uint8_t *key,
                                         size_t key_len,
                                         const uint8_t *inputs,
                                         size_t n_inputs,
                                         uint8_t *outputs,
                                         size_t capacity,
                                         size_t *n_outputs);

// Fraction of input vectors on which the keyed bitstream agrees with
// `reference` (exhaustive up to 20 inputs).
//
// # Safety
// `key` must hold `key_len` bytes; `fraction` must be writable.
BlockerStatus blocker_functional_match(const struct BlockerBitstream *bitstream,
                                       const uint8_t *key,
                                       size_t key_len,
                                       const struct BlockerNetlist *reference,
                                       double *fraction);

// # Safety
// `bitstream` must come from this library and not be used afterwards.
void blocker_bitstream_free(struct BlockerBitstream *bitstream);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOCKER_H */
