/* C interface to the embednn model compiler. Generated by cbindgen; do not edit. */

#ifndef EMBEDNN_H
#define EMBEDNN_H

#include <stddef.h>
#include <stdint.h>

/*
 Result codes. `ENN_STATUS_OK` is zero; every other value is an error.
 */
typedef enum EnnStatus {
  ENN_STATUS_OK = 0,
  ENN_STATUS_NULL_POINTER = 1,
  ENN_STATUS_INVALID_UTF8 = 2,
  ENN_STATUS_PARSE = 3,
  ENN_STATUS_SHAPE = 4,
  ENN_STATUS_DOMAIN = 5,
  ENN_STATUS_QUANTIZATION = 6,
  ENN_STATUS_CODEGEN = 7,
  ENN_STATUS_IO = 8,
  ENN_STATUS_BUFFER_SIZE = 9,
  ENN_STATUS_PANIC = 10,
} EnnStatus;

/*
 A parsed, validated network.
 */
typedef struct EnnModel EnnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Parses a model document held in memory. `sidecar` may be null when the
 document stores its weights inline. On success `*out` owns a handle that
 must be released with `enn_model_free`.

 # Safety
 `document` must point to `document_len` readable bytes, `sidecar` to
 `sidecar_len` bytes or be null, and `out` must be writable.
 */
enum EnnStatus enn_model_load(const uint8_t *document,
                              size_t document_len,
                              const uint8_t *sidecar,
                              size_t sidecar_len,
                              struct EnnModel **out);

/*
 Reads a model document from disk; a declared sidecar is resolved next to it.

 # Safety
 `path` must be a NUL-terminated string and `out` must be writable.
 */
enum EnnStatus enn_model_load_file(const char *path, struct EnnModel **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `model` must come from a load function and not have been freed.
 */
void enn_model_free(struct EnnModel *model);

/*
 Number of input floats, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t enn_model_input_len(const struct EnnModel *model);

/*
 Number of output floats, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t enn_model_output_len(const struct EnnModel *model);

/*
 Total trainable parameters, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t enn_model_param_count(const struct EnnModel *model);

/*
 Float inference. `input_len` must equal the model's input length and
 `output_len` must be at least its output length.

 # Safety
 `input` and `output` must point to buffers of the stated lengths.
 */
enum EnnStatus enn_model_forward(const struct EnnModel *model,
                                 const float *input,
                                 size_t input_len,
                                 float *output,
                                 size_t output_len);

/*
 Fixed-point inference at `bits` total bits (2, 8, 16 or 32), with
 activation formats calibrated on this input.

 # Safety
 As for `enn_model_forward`.
 */
enum EnnStatus enn_model_forward_fixed(const struct EnnModel *model,
                                       uint32_t bits,
                                       const float *input,
                                       size_t input_len,
                                       float *output,
                                       size_t output_len);

/*
 Flash-budget check: `*fits` is set to 1 when the parameter count is at
 most floor(gamma_num / gamma_den * flash_bits / bits_per_param).
 `max_params` may be null.

 # Safety
 `fits` must be writable; `max_params` must be writable or null.
 */
enum EnnStatus enn_model_footprint(const struct EnnModel *model,
                                   uint64_t flash_bits,
                                   uint64_t gamma_num,
                                   uint64_t gamma_den,
                                   uint32_t bits_per_param,
                                   int32_t *fits,
                                   uint64_t *max_params);

/*
 Writes the C bundle into `dir`. `prefix` may be null to derive one from
 the network name.

 # Safety
 `dir` must be a NUL-terminated string; `prefix` must be one or null.
 */
enum EnnStatus enn_model_codegen_write(const struct EnnModel *model,
                                       const char *dir,
                                       const char *prefix);

/*
 Message for the last failed call on this thread, or null if it succeeded.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *enn_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *enn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBEDNN_H */
