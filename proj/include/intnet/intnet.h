/* Copyright 2026 The intnet Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of libintnet. Every object is an opaque handle released with
 * its *_free function; every fallible call returns an intnet_status and, on
 * failure, leaves a message retrievable with intnet_last_error() on the
 * calling thread. Strings returned through char** are freed with
 * intnet_string_free().
 */

#ifndef INTNET_INTNET_H_
#define INTNET_INTNET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(INTNET_BUILDING_LIBRARY)
#define INTNET_API __declspec(dllexport)
#else
#define INTNET_API __declspec(dllimport)
#endif
#else
#define INTNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum intnet_status {
  INTNET_OK = 0,
  INTNET_ERR_INVALID_ARGUMENT = 1,
  INTNET_ERR_IO = 2,
  INTNET_ERR_PARSE = 3,
  INTNET_ERR_VALIDATION = 4,
  INTNET_ERR_SHAPE = 5,
  INTNET_ERR_CALIBRATION = 6,
  INTNET_ERR_QUANTIZATION = 7,
  INTNET_ERR_THRESHOLD = 8,
  INTNET_ERR_INTERNAL = 100
} intnet_status;

typedef enum intnet_elem_kind {
  INTNET_F32 = 0,
  INTNET_I8 = 1,
  INTNET_I32 = 2,
  INTNET_U8 = 3
} intnet_elem_kind;

typedef enum intnet_compare_mode {
  INTNET_CLASSIFY = 0, /* integer units, ratio ignored */
  INTNET_REGRESS = 1   /* float units, output divided by its ratio */
} intnet_compare_mode;

typedef enum intnet_model_kind { INTNET_MODEL_FLOAT = 0, INTNET_MODEL_INT = 1 } intnet_model_kind;

typedef struct intnet_tensor intnet_tensor;
typedef struct intnet_float_model intnet_float_model;
typedef struct intnet_int_model intnet_int_model;
typedef struct intnet_calibration intnet_calibration;
typedef struct intnet_conversion intnet_conversion;

typedef struct intnet_exec_options {
  int threads;            /* >= 1 */
  uint64_t schedule_seed; /* 0: natural tile order */
} intnet_exec_options;

typedef struct intnet_convert_options {
  int bits; /* activation bit depth, 4..8 */
  double n;
  double n_step;
  double n_cap;
  int per_channel; /* -1: per-channel iff the conv has batch norm */
  /* With target_psnr > 0 the n loop re-calibrates on `images` (n-sigma
     calibrations only) and stops once the equivalence PSNR reaches it. */
  double target_psnr;
  const intnet_tensor* const* images; /* uint8, CHW or NCHW */
  size_t image_count;
} intnet_convert_options;

typedef struct intnet_comparison {
  uint64_t count;
  double max_abs;
  double mean_abs;
  double mse;
  double peak;
  double psnr; /* +inf when identical */
} intnet_comparison;

typedef struct intnet_payload {
  uint64_t total;
  uint64_t weight_bytes;
  uint64_t bias_bytes;
  uint64_t metadata_bytes;
} intnet_payload;

INTNET_API const char* intnet_version(void);
INTNET_API const char* intnet_last_error(void);
INTNET_API const char* intnet_status_name(intnet_status status);
INTNET_API void intnet_string_free(char* s);

/* ---- tensors ---- */

/* `data` may be NULL for a zero-filled tensor. */
INTNET_API intnet_status intnet_tensor_create(intnet_elem_kind kind, int rank, const int64_t* dims,
                                              const void* data, intnet_tensor** out);
INTNET_API intnet_status intnet_tensor_load(const char* path, intnet_tensor** out);
INTNET_API intnet_status intnet_tensor_save(const intnet_tensor* t, const char* path);
/* Stacks CHW or 1xCxHxW tensors of one kind into NxCxHxW. */
INTNET_API intnet_status intnet_tensor_stack(const intnet_tensor* const* items, size_t count,
                                             intnet_tensor** out);
INTNET_API intnet_status intnet_tensor_slice(const intnet_tensor* t, int64_t index,
                                             intnet_tensor** out);
INTNET_API void intnet_tensor_free(intnet_tensor* t);
INTNET_API intnet_elem_kind intnet_tensor_kind(const intnet_tensor* t);
INTNET_API int intnet_tensor_rank(const intnet_tensor* t);
INTNET_API int64_t intnet_tensor_dim(const intnet_tensor* t, int axis);
INTNET_API size_t intnet_tensor_size(const intnet_tensor* t);
INTNET_API const void* intnet_tensor_data(const intnet_tensor* t);
INTNET_API int intnet_tensor_equal(const intnet_tensor* a, const intnet_tensor* b);

/* ---- models ---- */

INTNET_API intnet_status intnet_model_file_kind(const char* path, intnet_model_kind* out);

INTNET_API intnet_status intnet_float_model_load(const char* path, intnet_float_model** out);
INTNET_API intnet_status intnet_float_model_save(const intnet_float_model* m, const char* path);
INTNET_API void intnet_float_model_free(intnet_float_model* m);
INTNET_API void intnet_float_model_input(const intnet_float_model* m, int64_t chw[3]);
INTNET_API double intnet_float_model_input_ratio(const intnet_float_model* m);
INTNET_API intnet_status intnet_float_model_payload(const intnet_float_model* m, intnet_payload* out);

INTNET_API intnet_status intnet_int_model_load(const char* path, intnet_int_model** out);
INTNET_API intnet_status intnet_int_model_save(const intnet_int_model* m, const char* path);
INTNET_API void intnet_int_model_free(intnet_int_model* m);
INTNET_API void intnet_int_model_input(const intnet_int_model* m, int64_t chw[3]);
INTNET_API double intnet_int_model_output_ratio(const intnet_int_model* m);
INTNET_API int intnet_int_model_max_int(const intnet_int_model* m);
INTNET_API intnet_status intnet_int_model_payload(const intnet_int_model* m, intnet_payload* out);

/* Demo networks: "vrcnn", "linear", "residual". size <= 0 picks the default. */
INTNET_API intnet_status intnet_synth_model(const char* topology, uint64_t seed, int64_t size,
                                            int batch_norm, intnet_float_model** out);
/* count uniform uint8 images stacked as NxCxHxW. */
INTNET_API intnet_status intnet_random_images(uint64_t seed, size_t count, const int64_t chw[3],
                                              intnet_tensor** out);

/* ---- calibration ---- */

/* `batches` are uint8 tensors (CHW or NCHW), one quantile per batch. */
INTNET_API intnet_status intnet_calibrate_nsigma(const intnet_float_model* m,
                                                 const intnet_tensor* const* batches, size_t count,
                                                 double n, intnet_calibration** out);
INTNET_API intnet_status intnet_calibrate_geometric(const intnet_float_model* m, double a0,
                                                    double an, intnet_calibration** out);
/* Largest |float output| over the batches; a starting point for a_n. */
INTNET_API intnet_status intnet_scan_output_range(const intnet_float_model* m,
                                                  const intnet_tensor* const* batches,
                                                  size_t count, double* out);
INTNET_API intnet_status intnet_calibration_load(const char* path, intnet_calibration** out);
INTNET_API intnet_status intnet_calibration_save(const intnet_calibration* c, const char* path);
INTNET_API intnet_status intnet_calibration_report(const intnet_calibration* c, char** out);
INTNET_API intnet_status intnet_calibration_bound(const intnet_calibration* c, const char* layer,
                                                  double* out);
INTNET_API void intnet_calibration_free(intnet_calibration* c);

/* ---- conversion ---- */

INTNET_API void intnet_convert_options_init(intnet_convert_options* opts);
INTNET_API intnet_status intnet_convert(const intnet_float_model* m, const intnet_calibration* c,
                                        const intnet_convert_options* opts,
                                        intnet_conversion** out);
INTNET_API intnet_status intnet_conversion_int_model(const intnet_conversion* r,
                                                     intnet_int_model** out);
/* The float network the integer model reproduces: BN folded, weights
   discretized, BReLU bounds fixed up. */
INTNET_API intnet_status intnet_conversion_float_model(const intnet_conversion* r,
                                                       intnet_float_model** out);
INTNET_API intnet_status intnet_conversion_report(const intnet_conversion* r, char** out);
INTNET_API int intnet_conversion_threshold_met(const intnet_conversion* r);
INTNET_API double intnet_conversion_n_used(const intnet_conversion* r);
INTNET_API void intnet_conversion_free(intnet_conversion* r);

/* ---- inference ---- */

INTNET_API void intnet_exec_options_init(intnet_exec_options* opts);
/* `raw` is uint8 CHW or NCHW; output is float32 NCHW. */
INTNET_API intnet_status intnet_forward_float(const intnet_float_model* m, const intnet_tensor* raw,
                                              intnet_tensor** out);
/* Output is the int32 NCHW accumulator of the last layer. */
INTNET_API intnet_status intnet_forward_int(const intnet_int_model* m, const intnet_tensor* raw,
                                            const intnet_exec_options* opts, intnet_tensor** out);
/* Writes every layer output to `dir` as <index>_<layer>.tensor. */
INTNET_API intnet_status intnet_trace_int(const intnet_int_model* m, const intnet_tensor* raw,
                                          const intnet_exec_options* opts, const char* dir);
INTNET_API intnet_status intnet_dequantize(const intnet_int_model* m, const intnet_tensor* values,
                                           intnet_tensor** out);
INTNET_API intnet_status intnet_compare(const intnet_float_model* f, const intnet_int_model* q,
                                        const intnet_tensor* const* images, size_t count,
                                        intnet_compare_mode mode, const intnet_exec_options* opts,
                                        intnet_comparison* out);

#ifdef __cplusplus
}
#endif

#endif /* INTNET_INTNET_H_ */
