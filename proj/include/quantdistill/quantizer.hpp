#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "quantdistill/tensor.hpp"

namespace quantdistill {

/// Affine (asymmetric) quantization parameters for one tensor or one channel.
///
/// Codes live in the signed b-bit domain [-2^(b-1), 2^(b-1)-1]. The zero point
/// is kept as a 32-bit integer: for a range starting at 0 it equals 2^(b-1),
/// which does not fit a signed b-bit value. Codes are clipped, the zero point
/// is not.
struct QuantParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
  int bit_width = 8;
  float range_lo = 0.0f;
  float range_hi = 0.0f;

  std::int32_t code_min() const noexcept { return -(std::int32_t{1} << (bit_width - 1)); }
  std::int32_t code_max() const noexcept { return (std::int32_t{1} << (bit_width - 1)) - 1; }
  bool contains(float x) const noexcept { return range_lo <= x && x <= range_hi; }

  /// Scale and zero point for [lo, hi]; a degenerate range (lo == hi) uses
  /// the constant fallback of compute_scale / degenerate_zero_point.
  static QuantParams from_range(float lo, float hi, int bit_width);

  bool operator==(const QuantParams&) const = default;
};

/// Bit widths the quantizer accepts. The training pipeline restricts this
/// further to 4, 6 and 8.
bool valid_bit_width(int bits) noexcept;
void require_bit_width(int bits);

/// (hi - lo) / (2^b - 1). For hi == lo returns 1 when lo is zero and |lo|
/// otherwise, so that a constant tensor round-trips exactly.
double compute_scale(double lo, double hi, int bits);

/// round(lo * (2^b - 1) / (hi - lo) + 2^(b-1)), rounding half to even.
/// Requires hi > lo.
std::int32_t compute_zero_point(double lo, double hi, int bits);

/// Zero point paired with the degenerate scale: 2^(b-1) + sign(lo).
std::int32_t degenerate_zero_point(double lo, int bits);

/// Single-value transform + clip and its inverse.
std::int32_t quantize_value(float x, const QuantParams& p) noexcept;
float dequantize_value(std::int32_t code, const QuantParams& p) noexcept;
inline float fake_quantize_value(float x, const QuantParams& p) noexcept {
  return dequantize_value(quantize_value(x, p), p);
}

struct QuantizedTensor {
  Shape shape;
  std::vector<std::int32_t> codes;
  /// One entry for per-tensor mode, one per slice along channel_axis otherwise.
  std::vector<QuantParams> params;
  std::optional<std::size_t> channel_axis;

  const QuantParams& params_for(std::size_t flat_index) const;
};

struct Granularity {
  std::optional<std::size_t> channel_axis;

  static Granularity per_tensor() { return {}; }
  static Granularity per_channel(std::size_t axis) { return {axis}; }
};

/// Parameters from the extrema of `t`: one set for per-tensor granularity,
/// one per slice along the channel axis otherwise.
std::vector<QuantParams> derive_params(const Tensor& t, int bits,
                                       Granularity granularity = Granularity::per_tensor());

QuantizedTensor quantize(const Tensor& x, const QuantParams& p);
QuantizedTensor quantize(const Tensor& x, std::span<const QuantParams> per_channel,
                         std::size_t channel_axis);
Tensor dequantize(const QuantizedTensor& q);

/// Running min/max over every tensor it has seen.
class RangeObserver {
 public:
  void update(const Tensor& t);

  float lo() const noexcept { return lo_; }
  float hi() const noexcept { return hi_; }
  std::uint64_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  /// Freezes the observed range into parameters; StateError if nothing was observed.
  QuantParams freeze(int bits) const;

  bool operator==(const RangeObserver&) const = default;

 private:
  float lo_ = 0.0f;
  float hi_ = 0.0f;
  std::uint64_t count_ = 0;
};

RangeObserver observer_update(RangeObserver observer, const Tensor& t);

}  // namespace quantdistill
