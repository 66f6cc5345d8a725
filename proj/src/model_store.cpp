#include "quantdistill/model_store.hpp"

#include <string>
#include <zlib.h>

#include "binary_io.hpp"
#include "quantdistill/errors.hpp"

namespace quantdistill {

namespace {

constexpr std::uint8_t kRawWeights = 0;
constexpr std::uint8_t kPackedCodes = 1;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

void write_params(detail::ByteWriter& w, const QuantParams& p) {
  w.f32(p.scale);
  w.i32(p.zero_point);
  w.u8(static_cast<std::uint8_t>(p.bit_width));
  w.f32(p.range_lo);
  w.f32(p.range_hi);
}

QuantParams read_params(detail::ByteReader& r) {
  QuantParams p;
  p.scale = r.f32("quant scale");
  p.zero_point = r.i32("quant zero point");
  p.bit_width = r.u8("quant bit width");
  p.range_lo = r.f32("quant range lo");
  p.range_hi = r.f32("quant range hi");
  if (!valid_bit_width(p.bit_width)) r.fail("invalid quant bit width " + std::to_string(p.bit_width));
  if (!(p.scale > 0.0f) || !(p.range_lo <= p.range_hi)) r.fail("invalid quantization parameters");
  return p;
}

}  // namespace

std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, int bits) {
  require_bit_width(bits);
  const std::int32_t offset = std::int32_t{1} << (bits - 1);
  std::vector<std::uint8_t> out((codes.size() * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t bit = 0;
  for (auto code : codes) {
    const auto u = static_cast<std::uint32_t>(code + offset);
    if (u >> bits) throw DomainError("code " + std::to_string(code) + " outside the " + std::to_string(bits) + "-bit domain");
    for (int k = 0; k < bits; ++k, ++bit) {
      if ((u >> k) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return out;
}

std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count, int bits) {
  require_bit_width(bits);
  if (packed.size() * 8 < count * static_cast<std::size_t>(bits)) throw FormatError("packed code buffer too short");
  const std::int32_t offset = std::int32_t{1} << (bits - 1);
  std::vector<std::int32_t> out(count);
  std::size_t bit = 0;
  for (auto& code : out) {
    std::uint32_t u = 0;
    for (int k = 0; k < bits; ++k, ++bit) u |= ((packed[bit / 8] >> (bit % 8)) & 1u) << k;
    code = static_cast<std::int32_t>(u) - offset;
  }
  return out;
}

std::vector<std::uint8_t> encode_model(const EmbeddingNet& net, ModelMode mode) {
  net.validate();
  const bool quantized = mode == ModelMode::Quantized;
  if (quantized && !net.calibrated()) throw StateError("saving a quantized model requires calibration");

  detail::ByteWriter w;
  w.bytes("QFMD");
  w.u16(kModelFileVersion);
  w.u8(static_cast<std::uint8_t>(mode));
  w.u8(static_cast<std::uint8_t>(quantized ? net.bit_width() : 32));
  w.u16(static_cast<std::uint16_t>(net.layers.size()));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    w.u32(static_cast<std::uint32_t>(layer.weight.dim(0)));
    w.u32(static_cast<std::uint32_t>(layer.weight.dim(1)));
    if (quantized) {
      w.u8(kPackedCodes);
      const auto params = net.weight_params(i);
      for (const auto& p : params) write_params(w, p);
      const auto q = quantize(layer.weight, params, 0);
      const auto packed = pack_codes(q.codes, net.bit_width());
      w.u32(static_cast<std::uint32_t>(packed.size()));
      w.raw(packed);
    } else {
      w.u8(kRawWeights);
      for (float v : layer.weight.data()) w.f32(v);
    }
    for (float v : layer.bias.data()) w.f32(v);
    if (net.calibrated()) {
      w.u8(1);
      write_params(w, net.activation_params()[i]);
    } else {
      w.u8(0);
    }
  }
  const auto crc = crc32_of(w.buffer().data(), w.size());
  w.u32(crc);
  return w.buffer();
}

EmbeddingNet decode_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "model file");
  if (r.bytes(4, "magic") != "QFMD") throw FormatError("model file: bad magic");
  const auto version = r.u16("version");
  if (version != kModelFileVersion) {
    throw FormatError("model file: unsupported version " + std::to_string(version));
  }
  if (bytes.size() < 4 + 2 + 4) throw FormatError("model file: truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (crc32_of(bytes.data(), body) != stored) throw FormatError("model file: checksum mismatch");

  const auto mode_byte = r.u8("mode");
  if (mode_byte > 1) r.fail("unknown mode " + std::to_string(mode_byte));
  const bool quantized = mode_byte == 1;
  const int bits = r.u8("bit width");
  if (quantized ? !valid_bit_width(bits) : bits != 32) r.fail("invalid bit width " + std::to_string(bits));
  const auto n_layers = r.u16("layer count");
  if (n_layers == 0) r.fail("no layers");

  EmbeddingNet net;
  std::vector<QuantParams> activation;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::size_t out = r.u32("layer out dim");
    const std::size_t in = r.u32("layer in dim");
    if (out == 0 || in == 0) r.fail("zero layer dimension");
    const auto kind = r.u8("payload kind");
    LinearLayer layer;
    if (kind == kRawWeights && !quantized) {
      if (r.remaining() < out * in * 4) r.fail("truncated weights");
      std::vector<float> w(out * in);
      for (auto& v : w) v = r.f32("weights");
      layer.weight = Tensor({out, in}, std::move(w));
    } else if (kind == kPackedCodes && quantized) {
      std::vector<QuantParams> params(out);
      for (auto& p : params) {
        p = read_params(r);
        if (p.bit_width != bits) r.fail("weight params disagree with file bit width");
      }
      const auto n_packed = r.u32("packed byte count");
      if (n_packed != (out * in * static_cast<std::size_t>(bits) + 7) / 8) r.fail("packed byte count mismatch");
      const auto packed = r.raw(n_packed, "packed codes");
      QuantizedTensor q{{out, in}, unpack_codes(packed, out * in, bits), params, 0};
      layer.weight = dequantize(q);
      layer.frozen_weight_params = std::move(params);
    } else {
      r.fail("payload kind " + std::to_string(kind) + " does not match file mode");
    }
    std::vector<float> b(out);
    for (auto& v : b) v = r.f32("biases");
    layer.bias = Tensor({out}, std::move(b));
    if (r.u8("activation flag")) {
      activation.push_back(read_params(r));
    } else if (quantized) {
      r.fail("quantized layer without activation params");
    }
    net.layers.push_back(std::move(layer));
  }
  if (r.remaining() != 4) r.fail("unexpected trailing bytes");
  try {
    net.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("model file: layer manifest does not compose: ") + e.what());
  }
  if (!activation.empty()) {
    if (activation.size() != n_layers) throw FormatError("model file: activation params on some layers only");
    net.set_activation_params(std::move(activation));
    if (quantized && net.bit_width() != bits) throw FormatError("model file: activation bit width mismatch");
  }
  return net;
}

void save_model(const EmbeddingNet& net, const std::filesystem::path& path, ModelMode mode) {
  detail::write_file_atomic(path, encode_model(net, mode));
}

EmbeddingNet load_model(const std::filesystem::path& path) { return decode_model(detail::read_file(path)); }

ModelMode natural_mode(const EmbeddingNet& net) {
  return net.calibrated() ? ModelMode::Quantized : ModelMode::FullPrecision;
}

SizeReport size_report(std::uint64_t param_count, std::span<const int> bit_widths, std::uint64_t overhead_bytes) {
  if (param_count == 0) throw DomainError("size_report needs a positive parameter count");
  SizeReport r;
  r.param_count = param_count;
  r.fp32_bytes = param_count * 4;
  for (int b : bit_widths) {
    require_bit_width(b);
    SizeEntry e;
    e.bits = b;
    e.payload_bytes = (param_count * static_cast<std::uint64_t>(b) + 7) / 8;
    e.overhead_bytes = overhead_bytes;
    e.total_bytes = e.payload_bytes + overhead_bytes;
    e.payload_ratio = static_cast<double>(e.payload_bytes) / static_cast<double>(r.fp32_bytes);
    e.ratio = static_cast<double>(e.total_bytes) / static_cast<double>(r.fp32_bytes);
    r.entries.push_back(e);
  }
  return r;
}

std::uint64_t quantization_overhead_bytes(const EmbeddingNet& net) {
  std::uint64_t bytes = 0;
  for (const auto& l : net.layers) {
    bytes += l.weight.dim(0) * kQuantParamsBytes;  // per-channel weight params
    bytes += l.bias.size() * 4;
    bytes += kQuantParamsBytes;  // activation params
  }
  return bytes;
}

}  // namespace quantdistill
