#include <doctest.h>

#include <cmath>
#include <random>

#include "quantdistill/errors.hpp"
#include "quantdistill/tensor.hpp"

using namespace quantdistill;

TEST_CASE("matmul examples") {
  const auto ident = Tensor::matrix({{1, 0}, {0, 1}});
  const auto b = Tensor::matrix({{5, 6}, {7, 8}});
  CHECK(matmul(ident, b) == b);
  CHECK(matmul(Tensor::matrix({{2}}), Tensor::matrix({{3}})) == Tensor::matrix({{6}}));
  CHECK(matmul(Tensor::matrix({{1, 2}, {3, 4}}), b) == Tensor::matrix({{19, 22}, {43, 50}}));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
  CHECK_THROWS_AS(matmul(Tensor({3}), Tensor({3, 1})), DimensionError);
}

TEST_CASE("identity is neutral on integer matrices") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pick(-20, 20);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + trial % 5, n = 1 + (trial * 3) % 4;
    Tensor a({m, n});
    for (float& v : a.data()) v = static_cast<float>(pick(rng));
    Tensor im({m, m}), in({n, n});
    for (std::size_t i = 0; i < m; ++i) im.at(i, i) = 1;
    for (std::size_t i = 0; i < n; ++i) in.at(i, i) = 1;
    CHECK(matmul(im, a) == a);
    CHECK(matmul(a, in) == a);
  }
}

TEST_CASE("reduce_extrema examples") {
  auto e = reduce_extrema(Tensor::vector({-1, 0, 3}));
  CHECK(e.min[0] == -1);
  CHECK(e.max[0] == 3);

  e = reduce_extrema(Tensor::vector({5}));
  CHECK(e.min[0] == 5);
  CHECK(e.max[0] == 5);

  // reducing along axis 0 collapses the rows: one result per column
  const auto t = Tensor::matrix({{1, -2}, {4, 0}});
  e = reduce_extrema(t, 0);
  CHECK(e.min == Tensor::vector({1, -2}));
  CHECK(e.max == Tensor::vector({4, 0}));
}

TEST_CASE("slice and axis extrema match brute-force scans") {
  std::mt19937 rng(3);
  std::normal_distribution<float> n;
  Tensor t({4, 3, 2});
  for (float& v : t.data()) v = n(rng);

  // slice i along axis 0 is the contiguous block of 6 elements
  const auto e0 = slice_extrema(t, 0);
  for (std::size_t i = 0; i < 4; ++i) {
    float lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < 6; ++k) {
      lo = std::min(lo, t[i * 6 + k]);
      hi = std::max(hi, t[i * 6 + k]);
    }
    CHECK(e0.min[i] == lo);
    CHECK(e0.max[i] == hi);
  }
  const auto s2 = slice_extrema(t, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    float lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = c; k < t.size(); k += 2) {
      lo = std::min(lo, t[k]);
      hi = std::max(hi, t[k]);
    }
    CHECK(s2.min[c] == lo);
    CHECK(s2.max[c] == hi);
  }

  // reducing along axis 1 leaves a [4,2] result
  const auto r1 = reduce_extrema(t, 1);
  CHECK(r1.min.shape() == Shape{4, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      float lo = INFINITY, hi = -INFINITY;
      for (std::size_t j = 0; j < 3; ++j) {
        lo = std::min(lo, t[(i * 3 + j) * 2 + k]);
        hi = std::max(hi, t[(i * 3 + j) * 2 + k]);
      }
      CHECK(r1.min[i * 2 + k] == lo);
      CHECK(r1.max[i * 2 + k] == hi);
    }
  }
}

TEST_CASE("reduce_extrema errors") {
  CHECK_THROWS_AS(reduce_extrema(Tensor{}), DomainError);
  CHECK_THROWS_AS(reduce_extrema(Tensor::vector({1, 2}), 1), DimensionError);
}

TEST_CASE("extrema bound every element") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(-100, 100);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t({1 + static_cast<std::size_t>(trial % 7), 3});
    for (float& v : t.data()) v = u(rng);
    const auto e = reduce_extrema(t);
    for (float v : t.data()) {
      CHECK(e.min[0] <= v);
      CHECK(v <= e.max[0]);
    }
  }
}

TEST_CASE("l2_normalize examples") {
  const auto a = l2_normalize(Tensor::matrix({{3, 4}}));
  CHECK(a.at(0, 0) == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(a.at(0, 1) == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(l2_normalize(Tensor::matrix({{1, 0}})) == Tensor::matrix({{1, 0}}));
  CHECK(l2_normalize(Tensor::matrix({{2, 2, 2, 2}})) == Tensor::matrix({{0.5f, 0.5f, 0.5f, 0.5f}}));
  CHECK_THROWS_AS(l2_normalize(Tensor::matrix({{1, 1}, {0, 0}})), DomainError);
}

TEST_CASE("l2_normalize gives unit rows and is idempotent") {
  std::mt19937 rng(5);
  std::normal_distribution<float> n(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t({3, 1 + static_cast<std::size_t>(trial % 9)});
    for (float& v : t.data()) v = n(rng);
    const auto y = l2_normalize(t);
    const auto yy = l2_normalize(y);
    for (std::size_t r = 0; r < 3; ++r) {
      double sq = 0;
      for (float v : y.row(r)) sq += double(v) * v;
      CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(yy[i] - y[i]) <= 1e-6f);
  }
}

TEST_CASE("relu examples") {
  CHECK(relu(Tensor::vector({-1, 0, 2})) == Tensor::vector({0, 0, 2}));
  CHECK(relu(Tensor::vector({-3, -0.5f, -7})) == Tensor::vector({0, 0, 0}));
  CHECK(relu(Tensor::vector({0.5f})) == Tensor::vector({0.5f}));
}

TEST_CASE("operations are deterministic") {
  std::mt19937 rng(9);
  std::normal_distribution<float> n;
  Tensor a({7, 13}), b({13, 5});
  for (float& v : a.data()) v = n(rng);
  for (float& v : b.data()) v = n(rng);
  CHECK(matmul(a, b) == matmul(a, b));
  CHECK(l2_normalize(a) == l2_normalize(a));
}

TEST_CASE("tensor construction validates shape") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 2}), DimensionError);
  const Tensor t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(all_finite(t));
}
