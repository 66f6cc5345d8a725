#include "quantdistill/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "quantdistill/errors.hpp"

namespace quantdistill {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::vector(std::initializer_list<float> values) {
  return Tensor({values.size()}, std::vector<float>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<float> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

std::span<const float> Tensor::row(std::size_t r) const {
  const std::size_t n = shape_[1];
  return std::span<const float>(data_).subspan(r * n, n);
}

std::span<float> Tensor::row(std::size_t r) {
  const std::size_t n = shape_[1];
  return std::span<float>(data_).subspan(r * n, n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 operands, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace {

// Flat index = (outer * n + index along axis) * inner + inner offset.
struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Tensor& t, std::size_t axis) {
  const std::size_t n = t.dim(axis);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.shape()[i];
  return {t.size() / (n * inner), n, inner};
}

}  // namespace

Extrema reduce_extrema(const Tensor& t, std::optional<std::size_t> axis) {
  if (t.empty()) throw DomainError("reduce_extrema of an empty tensor");
  const auto data = t.data();
  if (!axis) {
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    return {Tensor::vector({*lo}), Tensor::vector({*hi})};
  }
  const auto [outer, n, inner] = split_at(t, *axis);
  Shape out_shape;
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i != *axis) out_shape.push_back(t.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor lo(out_shape), hi(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      float mn = data[o * n * inner + i];
      float mx = mn;
      for (std::size_t c = 1; c < n; ++c) {
        const float v = data[(o * n + c) * inner + i];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      lo[o * inner + i] = mn;
      hi[o * inner + i] = mx;
    }
  }
  return {std::move(lo), std::move(hi)};
}

Extrema slice_extrema(const Tensor& t, std::size_t axis) {
  if (t.empty()) throw DomainError("slice_extrema of an empty tensor");
  const auto data = t.data();
  const auto [outer, n, inner] = split_at(t, axis);
  Tensor lo({n}), hi({n});
  for (std::size_t c = 0; c < n; ++c) {
    float mn = data[c * inner];
    float mx = mn;
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = (o * n + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        mn = std::min(mn, data[base + i]);
        mx = std::max(mx, data[base + i]);
      }
    }
    lo[c] = mn;
    hi[c] = mx;
  }
  return {std::move(lo), std::move(hi)};
}

Tensor l2_normalize(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("l2_normalize expects [M,d], got " + shape_string(t.shape()));
  Tensor out = t;
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    auto row = out.row(r);
    float sq = 0.0f;
    for (float v : row) sq += v * v;
    const float norm = std::sqrt(sq);
    if (!(norm > 0.0f)) throw DomainError("l2_normalize: row " + std::to_string(r) + " has zero norm");
    for (float& v : row) v /= norm;
  }
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

}  // namespace quantdistill
