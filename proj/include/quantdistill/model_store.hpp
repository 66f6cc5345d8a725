#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "quantdistill/graph.hpp"

namespace quantdistill {

enum class ModelMode : std::uint8_t { FullPrecision = 0, Quantized = 1 };

inline constexpr std::uint16_t kModelFileVersion = 1;

/// Model file layout (little-endian throughout):
///
///   "QFMD" | u16 version | u8 mode | u8 bit width (32 for FP32) | u16 layers
///   per layer:
///     u32 out | u32 in | u8 payload kind (0 raw f32, 1 packed codes)
///     kind 0: out*in f32 weights
///     kind 1: out x QuantParams | u32 packed bytes | codes, b bits each
///     out f32 biases
///     u8 has activation params | QuantParams
///   u32 CRC32 of every preceding byte
///
/// QuantParams block: f32 scale | i32 zero point | u8 bit width | f32 lo | f32 hi.
/// Codes are stored offset by 2^(b-1) and packed LSB-first.
std::vector<std::uint8_t> encode_model(const EmbeddingNet& net, ModelMode mode);
EmbeddingNet decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const EmbeddingNet& net, const std::filesystem::path& path, ModelMode mode);
EmbeddingNet load_model(const std::filesystem::path& path);

/// Quantized for calibrated nets, full precision otherwise.
ModelMode natural_mode(const EmbeddingNet& net);
inline ForwardMode forward_mode(ModelMode mode) {
  return mode == ModelMode::Quantized ? ForwardMode::Quantized : ForwardMode::FullPrecision;
}

/// b-bit packing of signed codes in [-2^(b-1), 2^(b-1)-1].
std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, int bits);
std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count, int bits);

inline constexpr std::uint64_t kQuantParamsBytes = 17;

struct SizeEntry {
  int bits = 0;
  std::uint64_t payload_bytes = 0;   // param_count * b / 8, rounded up
  std::uint64_t overhead_bytes = 0;  // quantization params, biases, ...
  std::uint64_t total_bytes = 0;
  double payload_ratio = 0.0;        // payload / fp32
  double ratio = 0.0;                // total / fp32
};

struct SizeReport {
  std::uint64_t param_count = 0;
  std::uint64_t fp32_bytes = 0;
  std::vector<SizeEntry> entries;
};

/// Size accounting for `param_count` parameters stored at each bit width.
/// `overhead_bytes` is added to every quantized entry (0 = payload only).
SizeReport size_report(std::uint64_t param_count, std::span<const int> bit_widths,
                       std::uint64_t overhead_bytes = 0);

/// Bytes a quantized file spends beyond the packed weights: per-channel
/// weight params, FP32 biases and activation params.
std::uint64_t quantization_overhead_bytes(const EmbeddingNet& net);

inline double megabytes(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

}  // namespace quantdistill
