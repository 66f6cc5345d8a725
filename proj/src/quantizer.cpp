#include "quantdistill/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quantdistill/errors.hpp"

namespace quantdistill {

namespace {

double levels(int bits) { return std::ldexp(1.0, bits) - 1.0; }
double half_range(int bits) { return std::ldexp(1.0, bits - 1); }

// nearbyint honours the default rounding mode, which is round-half-to-even.
double round_half_even(double v) { return std::nearbyint(v); }

}  // namespace

bool valid_bit_width(int bits) noexcept { return bits >= 2 && bits <= 16; }

void require_bit_width(int bits) {
  if (!valid_bit_width(bits)) throw DomainError("unsupported bit width " + std::to_string(bits));
}

double compute_scale(double lo, double hi, int bits) {
  require_bit_width(bits);
  if (hi < lo) throw DomainError("compute_scale: range_hi < range_lo");
  if (hi == lo) return lo == 0.0 ? 1.0 : std::abs(lo);
  return (hi - lo) / levels(bits);
}

std::int32_t compute_zero_point(double lo, double hi, int bits) {
  require_bit_width(bits);
  if (!(hi > lo)) throw DomainError("compute_zero_point: requires range_hi > range_lo");
  return static_cast<std::int32_t>(round_half_even(lo * levels(bits) / (hi - lo) + half_range(bits)));
}

std::int32_t degenerate_zero_point(double lo, int bits) {
  require_bit_width(bits);
  const int sign = lo > 0.0 ? 1 : (lo < 0.0 ? -1 : 0);
  return static_cast<std::int32_t>(half_range(bits)) + sign;
}

QuantParams QuantParams::from_range(float lo, float hi, int bits) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("quantization range is not finite");
  QuantParams p;
  p.bit_width = bits;
  p.range_lo = lo;
  p.range_hi = hi;
  p.scale = static_cast<float>(compute_scale(lo, hi, bits));
  p.zero_point = hi > lo ? compute_zero_point(lo, hi, bits) : degenerate_zero_point(lo, bits);
  return p;
}

std::int32_t quantize_value(float x, const QuantParams& p) noexcept {
  const double t = round_half_even(static_cast<double>(x) / p.scale - p.zero_point);
  const double clipped = std::clamp(t, static_cast<double>(p.code_min()), static_cast<double>(p.code_max()));
  return static_cast<std::int32_t>(clipped);
}

float dequantize_value(std::int32_t code, const QuantParams& p) noexcept {
  return static_cast<float>(static_cast<double>(p.scale) *
                            (static_cast<double>(code) + static_cast<double>(p.zero_point)));
}

const QuantParams& QuantizedTensor::params_for(std::size_t flat_index) const {
  if (!channel_axis) return params.front();
  std::size_t inner = 1;
  for (std::size_t i = *channel_axis + 1; i < shape.size(); ++i) inner *= shape[i];
  return params[(flat_index / inner) % shape[*channel_axis]];
}

std::vector<QuantParams> derive_params(const Tensor& t, int bits, Granularity granularity) {
  require_bit_width(bits);
  if (t.empty()) throw DomainError("derive_params of an empty tensor");
  if (granularity.channel_axis && *granularity.channel_axis >= t.rank()) {
    throw DimensionError("channel axis " + std::to_string(*granularity.channel_axis) +
                         " out of range for shape " + shape_string(t.shape()));
  }
  const auto ext = granularity.channel_axis ? slice_extrema(t, *granularity.channel_axis) : reduce_extrema(t);
  std::vector<QuantParams> out;
  out.reserve(ext.min.size());
  for (std::size_t c = 0; c < ext.min.size(); ++c) {
    out.push_back(QuantParams::from_range(ext.min[c], ext.max[c], bits));
  }
  return out;
}

QuantizedTensor quantize(const Tensor& x, const QuantParams& p) {
  QuantizedTensor q{x.shape(), {}, {p}, std::nullopt};
  q.codes.reserve(x.size());
  for (float v : x.data()) q.codes.push_back(quantize_value(v, p));
  return q;
}

QuantizedTensor quantize(const Tensor& x, std::span<const QuantParams> per_channel,
                         std::size_t channel_axis) {
  if (channel_axis >= x.rank() || per_channel.size() != x.dim(channel_axis)) {
    throw DimensionError("per-channel quantize: " + std::to_string(per_channel.size()) +
                         " parameter sets for shape " + shape_string(x.shape()));
  }
  QuantizedTensor q{x.shape(), {}, {per_channel.begin(), per_channel.end()}, channel_axis};
  q.codes.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q.codes.push_back(quantize_value(x[i], q.params_for(i)));
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor out(q.shape);
  for (std::size_t i = 0; i < q.codes.size(); ++i) out[i] = dequantize_value(q.codes[i], q.params_for(i));
  return out;
}

void RangeObserver::update(const Tensor& t) {
  const auto ext = reduce_extrema(t);
  if (count_ == 0) {
    lo_ = ext.min[0];
    hi_ = ext.max[0];
  } else {
    lo_ = std::min(lo_, ext.min[0]);
    hi_ = std::max(hi_, ext.max[0]);
  }
  ++count_;
}

QuantParams RangeObserver::freeze(int bits) const {
  if (count_ == 0) throw StateError("range observer has not seen any data");
  return QuantParams::from_range(lo_, hi_, bits);
}

RangeObserver observer_update(RangeObserver observer, const Tensor& t) {
  observer.update(t);
  return observer;
}

}  // namespace quantdistill
