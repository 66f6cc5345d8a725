/*
 * C interface to the quantdistill library.
 *
 * All functions return a qd_status. On failure a description of the last
 * error on the calling thread is available from qd_last_error(). Handles are
 * opaque and owned by the caller; release them with the matching _free.
 */
#ifndef QUANTDISTILL_H_
#define QUANTDISTILL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QD_API __declspec(dllexport)
#else
#define QD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qd_status {
  QD_OK = 0,
  QD_ERR_UNKNOWN = 1,
  QD_ERR_CONFIG = 2,
  QD_ERR_FORMAT = 3,
  QD_ERR_IO = 4,
  QD_ERR_STATE = 5,
  QD_ERR_DIMENSION = 6,
  QD_ERR_DOMAIN = 7,
  QD_ERR_ARGUMENT = 8
} qd_status;

typedef struct qd_model qd_model;

typedef struct qd_quant_params {
  float scale;
  int32_t zero_point;
  int32_t bit_width;
  float range_lo;
  float range_hi;
} qd_quant_params;

typedef struct qd_size_entry {
  int32_t bits;
  uint64_t fp32_bytes;
  uint64_t payload_bytes;
  uint64_t overhead_bytes;
  uint64_t total_bytes;
  double payload_ratio;
  double ratio;
} qd_size_entry;

/* Receives progress and warning lines from the pipeline commands. */
typedef void (*qd_log_fn)(const char* message, void* user_data);

QD_API const char* qd_version(void);
QD_API const char* qd_last_error(void);
QD_API const char* qd_status_name(qd_status status);

/* Pipeline commands. Configs are `key = value` files; the environment
 * variable QUANTDISTILL_SEED overrides the config seed. */
QD_API qd_status qd_cmd_pretrain(const char* config_path, qd_log_fn log, void* user_data);
/* bits may be NULL / n_bits 0 to use the bit widths of the config. */
QD_API qd_status qd_cmd_distill(const char* config_path, const char* teacher_path, const int32_t* bits,
                                size_t n_bits, qd_log_fn log, void* user_data);
QD_API qd_status qd_cmd_eval(const char* config_path, const char* const* model_paths, size_t n_models,
                             qd_log_fn log, void* user_data);

/* Models. */
QD_API qd_status qd_model_load(const char* path, qd_model** out);
QD_API void qd_model_free(qd_model* model);
/* quantized != 0 stores packed codes; requires a calibrated model. */
QD_API qd_status qd_model_save(const qd_model* model, const char* path, int quantized);
QD_API qd_status qd_model_dims(const qd_model* model, size_t* input_dim, size_t* embedding_dim);
/* 32 for full-precision models. */
QD_API qd_status qd_model_bit_width(const qd_model* model, int32_t* bits);
QD_API qd_status qd_model_param_count(const qd_model* model, uint64_t* weights);
/* inputs: rows x input_dim row-major; out: rows x embedding_dim. Quantized
 * models run with fake quantization, others in full precision. */
QD_API qd_status qd_model_embed(const qd_model* model, const float* inputs, size_t rows, float* out,
                                size_t out_len);

/* Quantizer primitives. */
QD_API qd_status qd_params_from_range(float range_lo, float range_hi, int32_t bit_width, qd_quant_params* out);
QD_API qd_status qd_quantize(const float* values, size_t n, const qd_quant_params* params, int32_t* codes);
QD_API qd_status qd_dequantize(const int32_t* codes, size_t n, const qd_quant_params* params, float* values);

/* Size accounting for param_count parameters at one bit width. */
QD_API qd_status qd_size_report(uint64_t param_count, int32_t bit_width, uint64_t overhead_bytes,
                                qd_size_entry* out);

#ifdef __cplusplus
}
#endif

#endif /* QUANTDISTILL_H_ */
