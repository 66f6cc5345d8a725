#include "quantdistill/quantdistill.h"

#include <exception>
#include <string>
#include <vector>

#include "quantdistill/errors.hpp"
#include "quantdistill/experiment.hpp"
#include "quantdistill/model_store.hpp"
#include "quantdistill/quantizer.hpp"

struct qd_model {
  quantdistill::EmbeddingNet net;
};

namespace {

thread_local std::string g_last_error;

qd_status status_of(quantdistill::ErrorKind kind) {
  using quantdistill::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return QD_ERR_CONFIG;
    case ErrorKind::Format: return QD_ERR_FORMAT;
    case ErrorKind::Io: return QD_ERR_IO;
    case ErrorKind::State: return QD_ERR_STATE;
    case ErrorKind::Dimension: return QD_ERR_DIMENSION;
    case ErrorKind::Domain: return QD_ERR_DOMAIN;
  }
  return QD_ERR_UNKNOWN;
}

template <typename F>
qd_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return QD_OK;
  } catch (const quantdistill::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return QD_ERR_UNKNOWN;
}

qd_status bad_argument(const char* what) {
  g_last_error = what;
  return QD_ERR_ARGUMENT;
}

quantdistill::Log make_log(qd_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

quantdistill::QuantParams from_c(const qd_quant_params& p) {
  quantdistill::require_bit_width(p.bit_width);
  if (!(p.scale > 0.0f)) throw quantdistill::DomainError("scale must be positive");
  return {p.scale, p.zero_point, p.bit_width, p.range_lo, p.range_hi};
}

}  // namespace

extern "C" {

const char* qd_version(void) { return "1.0.0"; }

const char* qd_last_error(void) { return g_last_error.c_str(); }

const char* qd_status_name(qd_status status) {
  switch (status) {
    case QD_OK: return "ok";
    case QD_ERR_UNKNOWN: return "unknown error";
    case QD_ERR_CONFIG: return "config error";
    case QD_ERR_FORMAT: return "format error";
    case QD_ERR_IO: return "I/O error";
    case QD_ERR_STATE: return "state error";
    case QD_ERR_DIMENSION: return "dimension error";
    case QD_ERR_DOMAIN: return "domain error";
    case QD_ERR_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

qd_status qd_cmd_pretrain(const char* config_path, qd_log_fn log, void* user_data) {
  if (!config_path) return bad_argument("config_path is null");
  return guarded([&] { quantdistill::cmd_pretrain(quantdistill::load_config(config_path), make_log(log, user_data)); });
}

qd_status qd_cmd_distill(const char* config_path, const char* teacher_path, const int32_t* bits, size_t n_bits,
                         qd_log_fn log, void* user_data) {
  if (!config_path || !teacher_path) return bad_argument("config_path and teacher_path are required");
  if (n_bits && !bits) return bad_argument("bits is null");
  return guarded([&] {
    std::vector<int> widths(bits, bits + n_bits);
    quantdistill::cmd_distill(quantdistill::load_config(config_path), teacher_path, widths,
                              make_log(log, user_data));
  });
}

qd_status qd_cmd_eval(const char* config_path, const char* const* model_paths, size_t n_models, qd_log_fn log,
                      void* user_data) {
  if (!config_path || (n_models && !model_paths)) return bad_argument("config_path and model_paths are required");
  return guarded([&] {
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < n_models; ++i) {
      if (!model_paths[i]) throw quantdistill::ConfigError("null model path");
      paths.emplace_back(model_paths[i]);
    }
    quantdistill::cmd_eval(quantdistill::load_config(config_path), paths, make_log(log, user_data));
  });
}

qd_status qd_model_load(const char* path, qd_model** out) {
  if (!path || !out) return bad_argument("path and out are required");
  *out = nullptr;
  return guarded([&] { *out = new qd_model{quantdistill::load_model(path)}; });
}

void qd_model_free(qd_model* model) { delete model; }

qd_status qd_model_save(const qd_model* model, const char* path, int quantized) {
  if (!model || !path) return bad_argument("model and path are required");
  return guarded([&] {
    quantdistill::save_model(model->net, path,
                             quantized ? quantdistill::ModelMode::Quantized : quantdistill::ModelMode::FullPrecision);
  });
}

qd_status qd_model_dims(const qd_model* model, size_t* input_dim, size_t* embedding_dim) {
  if (!model || !input_dim || !embedding_dim) return bad_argument("null argument");
  return guarded([&] {
    *input_dim = model->net.input_dim();
    *embedding_dim = model->net.embedding_dim();
  });
}

qd_status qd_model_bit_width(const qd_model* model, int32_t* bits) {
  if (!model || !bits) return bad_argument("null argument");
  return guarded([&] {
    *bits = quantdistill::natural_mode(model->net) == quantdistill::ModelMode::Quantized ? model->net.bit_width() : 32;
  });
}

qd_status qd_model_param_count(const qd_model* model, uint64_t* weights) {
  if (!model || !weights) return bad_argument("null argument");
  return guarded([&] { *weights = model->net.weight_count(); });
}

qd_status qd_model_embed(const qd_model* model, const float* inputs, size_t rows, float* out, size_t out_len) {
  if (!model || !inputs || !out) return bad_argument("null argument");
  if (rows == 0) return bad_argument("rows must be positive");
  return guarded([&] {
    const auto& net = model->net;
    const size_t in = net.input_dim(), d = net.embedding_dim();
    if (out_len < rows * d) throw quantdistill::DimensionError("output buffer too small");
    quantdistill::Tensor x({rows, in}, std::vector<float>(inputs, inputs + rows * in));
    const auto f = quantdistill::embed(net, x, quantdistill::forward_mode(quantdistill::natural_mode(net)));
    std::copy(f.data().begin(), f.data().end(), out);
  });
}

qd_status qd_params_from_range(float range_lo, float range_hi, int32_t bit_width, qd_quant_params* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] {
    const auto p = quantdistill::QuantParams::from_range(range_lo, range_hi, bit_width);
    *out = {p.scale, p.zero_point, p.bit_width, p.range_lo, p.range_hi};
  });
}

qd_status qd_quantize(const float* values, size_t n, const qd_quant_params* params, int32_t* codes) {
  if (!params || (n && (!values || !codes))) return bad_argument("null argument");
  return guarded([&] {
    const auto p = from_c(*params);
    for (size_t i = 0; i < n; ++i) codes[i] = quantdistill::quantize_value(values[i], p);
  });
}

qd_status qd_dequantize(const int32_t* codes, size_t n, const qd_quant_params* params, float* values) {
  if (!params || (n && (!values || !codes))) return bad_argument("null argument");
  return guarded([&] {
    const auto p = from_c(*params);
    for (size_t i = 0; i < n; ++i) {
      if (codes[i] < p.code_min() || codes[i] > p.code_max()) throw quantdistill::DomainError("code outside the b-bit domain");
      values[i] = quantdistill::dequantize_value(codes[i], p);
    }
  });
}

qd_status qd_size_report(uint64_t param_count, int32_t bit_width, uint64_t overhead_bytes, qd_size_entry* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] {
    const int bits[] = {bit_width};
    const auto r = quantdistill::size_report(param_count, bits, overhead_bytes);
    const auto& e = r.entries.front();
    *out = {e.bits, r.fp32_bytes, e.payload_bytes, e.overhead_bytes, e.total_bytes, e.payload_ratio, e.ratio};
  });
}

}  // extern "C"
