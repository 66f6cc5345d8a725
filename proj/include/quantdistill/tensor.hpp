#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace quantdistill {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of 32-bit floats.
///
/// The element count always equals the product of the shape. Operations in
/// this header are pure and use a fixed accumulation order, so identical
/// inputs give bit-identical outputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor vector(std::initializer_list<float> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // rank-2 accessors
  float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  std::span<const float> row(std::size_t r) const;
  std::span<float> row(std::size_t r);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::string shape_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

/// Standard [m,k] x [k,n] product, summing over k left to right.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

struct Extrema {
  Tensor min;
  Tensor max;
};

/// Global extrema as two scalars (shape [1]) when no axis is given; otherwise
/// the extrema taken along `axis`, which is collapsed (a [m,n] tensor reduced
/// along axis 0 gives [n]).
Extrema reduce_extrema(const Tensor& t, std::optional<std::size_t> axis = std::nullopt);

/// Extrema of every slice t[..., i, ...] at index i of `axis`; one entry per
/// index, e.g. per row of a matrix for axis 0.
Extrema slice_extrema(const Tensor& t, std::size_t axis);

/// Row-wise unit L2 norm. Throws DomainError for a zero row.
Tensor l2_normalize(const Tensor& t);
Tensor relu(const Tensor& t);

bool all_finite(const Tensor& t);

}  // namespace quantdistill
