#include <doctest.h>

#include <cmath>
#include <random>

#include "quantdistill/errors.hpp"
#include "quantdistill/quantizer.hpp"

using namespace quantdistill;

TEST_CASE("compute_scale examples") {
  CHECK(compute_scale(-1, 1, 8) == doctest::Approx(2.0 / 255.0).epsilon(1e-12));
  CHECK(compute_scale(0, 2.55, 8) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(compute_scale(0, 0, 8) == 1.0);
  CHECK_THROWS_AS(compute_scale(1, 0, 8), DomainError);
}

TEST_CASE("compute_zero_point examples") {
  CHECK(compute_zero_point(0, 2.55, 8) == 128);   // exceeds int8 max, kept wide
  CHECK(compute_zero_point(-1, 1, 8) == 0);       // round(0.5) -> 0, half to even
  CHECK(compute_zero_point(-2.55, 0, 8) == -127);
  CHECK_THROWS_AS(compute_zero_point(1, 1, 8), DomainError);
  CHECK_THROWS_AS(compute_zero_point(2, 1, 8), DomainError);
}

TEST_CASE("rounding is half to even") {
  // lo * 255 / (hi - lo) + 128 lands exactly on .5 for these ranges
  CHECK(compute_zero_point(-1, 1, 8) == 0);      // 0.5 -> 0
  CHECK(compute_zero_point(-3, 1, 8) == -63);    // -63.25 -> -63
  CHECK(compute_zero_point(-1, 3, 8) == 64);     // 64.25 -> 64
  const auto p = QuantParams{1.0f, 0, 8, -128, 127};
  CHECK(quantize_value(2.5f, p) == 2);
  CHECK(quantize_value(3.5f, p) == 4);
  CHECK(quantize_value(-2.5f, p) == -2);
}

TEST_CASE("quantize and dequantize examples") {
  const auto p = QuantParams::from_range(0.0f, 2.55f, 8);
  CHECK(p.zero_point == 128);
  CHECK(p.scale == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(quantize_value(1.0f, p) == -28);
  CHECK(quantize_value(0.0f, p) == -128);
  CHECK(quantize_value(10.0f, p) == 127);
  CHECK(dequantize_value(-28, p) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(dequantize_value(0, p) == doctest::Approx(1.28).epsilon(1e-6));

  for (int bits : {4, 6, 8}) {
    const auto q = QuantParams::from_range(-0.7f, 1.9f, bits);
    CHECK(quantize_value(q.range_lo, q) == q.code_min());
    CHECK(std::abs(dequantize_value(q.code_min(), q) - q.range_lo) <= q.scale / 2);
  }
}

TEST_CASE("tensor quantize round trip uses the same codes as the scalar path") {
  const auto p = QuantParams::from_range(-1.0f, 1.0f, 6);
  const auto x = Tensor::vector({-1.0f, -0.3f, 0.0f, 0.42f, 1.0f, 3.0f});
  const auto q = quantize(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(q.codes[i] == quantize_value(x[i], p));
  const auto back = dequantize(q);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == dequantize_value(q.codes[i], p));
}

TEST_CASE("derive_params examples") {
  const auto t = Tensor::matrix({{-1, 1}, {0, 4}});
  const auto tensor_params = derive_params(t, 8);
  REQUIRE(tensor_params.size() == 1);
  CHECK(tensor_params[0].range_lo == -1);
  CHECK(tensor_params[0].range_hi == 4);

  const auto rows = derive_params(t, 8, Granularity::per_channel(0));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].range_lo == -1);
  CHECK(rows[0].range_hi == 1);
  CHECK(rows[1].range_lo == 0);
  CHECK(rows[1].range_hi == 4);

  const auto constant = derive_params(Tensor::matrix({{2, 2}}), 8);
  CHECK(constant[0].range_lo == 2);
  CHECK(constant[0].range_hi == 2);
  CHECK(constant[0].scale == 2.0f);  // degenerate fallback: |beta|

  CHECK_THROWS_AS(derive_params(Tensor{}, 8), DomainError);
  CHECK_THROWS_AS(derive_params(t, 8, Granularity::per_channel(2)), DimensionError);
  CHECK_THROWS_AS(derive_params(t, 1), DomainError);
}

TEST_CASE("degenerate ranges round-trip the constant exactly") {
  for (int bits : {4, 6, 8}) {
    for (float c : {0.0f, 2.0f, -3.0f, 0.37f, -1e-3f, 123.456f}) {
      const auto p = QuantParams::from_range(c, c, bits);
      CHECK(p.scale > 0.0f);
      const auto code = quantize_value(c, p);
      CHECK(code >= p.code_min());
      CHECK(code <= p.code_max());
      CHECK(dequantize_value(code, p) == c);
    }
  }
}

TEST_CASE("observer examples") {
  RangeObserver o;
  CHECK(o.empty());
  CHECK_THROWS_AS(o.freeze(8), StateError);
  o = observer_update(o, Tensor::vector({-1, 2}));
  CHECK(o.lo() == -1);
  CHECK(o.hi() == 2);
  o = observer_update(o, Tensor::vector({0, 1}));
  CHECK(o.lo() == -1);
  CHECK(o.hi() == 2);
  o = observer_update(o, Tensor::vector({-3, 5}));
  CHECK(o.lo() == -3);
  CHECK(o.hi() == 5);
  CHECK(o.count() == 3);
  const auto p = o.freeze(8);
  CHECK(p.range_lo == -3);
  CHECK(p.range_hi == 5);
}

TEST_CASE("scale matches (hi - lo) / (2^b - 1)") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-5, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    float lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    if (lo == hi) continue;
    for (int bits : {4, 6, 8}) {
      const auto p = QuantParams::from_range(lo, hi, bits);
      const double expected = (double(hi) - double(lo)) / (std::ldexp(1.0, bits) - 1);
      CHECK(std::abs(p.scale - expected) <= 1e-7 * expected);
    }
  }
}

TEST_CASE("round trip error is at most s/2 inside the range") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> bound(-4, 4);
  for (int bits : {4, 6, 8}) {
    for (int range = 0; range < 100; ++range) {
      float lo = bound(rng), hi = bound(rng);
      if (lo > hi) std::swap(lo, hi);
      if (hi - lo < 1e-3f) continue;
      const auto p = QuantParams::from_range(lo, hi, bits);
      std::uniform_real_distribution<float> x(lo, hi);
      for (int i = 0; i < 1000; ++i) {
        const float v = x(rng);
        const float err = std::abs(fake_quantize_value(v, p) - v);
        if (!(err <= p.scale / 2 + 1e-6f)) {
          FAIL("round trip error " << err << " for x=" << v << " in [" << lo << "," << hi << "] b=" << bits);
        }
      }
    }
  }
}

TEST_CASE("values outside the range saturate") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> bound(-4, 4);
  std::uniform_real_distribution<float> gap(0.01f, 10.0f);
  for (int bits : {4, 6, 8}) {
    for (int trial = 0; trial < 200; ++trial) {
      float lo = bound(rng), hi = bound(rng);
      if (lo > hi) std::swap(lo, hi);
      if (hi - lo < 1e-2f) continue;
      const auto p = QuantParams::from_range(lo, hi, bits);
      const float above = hi + gap(rng) * p.scale;
      const float below = lo - gap(rng) * p.scale;
      CHECK(fake_quantize_value(above, p) == dequantize_value(p.code_max(), p));
      CHECK(fake_quantize_value(below, p) == dequantize_value(p.code_min(), p));
    }
  }
}

TEST_CASE("quantization is monotone") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<float> u(-3, 3);
  const auto p = QuantParams::from_range(-1.3f, 2.1f, 6);
  for (int i = 0; i < 20000; ++i) {
    float a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(quantize_value(a, p) <= quantize_value(b, p));
  }
}

TEST_CASE("4-bit code domain: exhaustive") {
  const auto p = QuantParams::from_range(-0.9f, 2.3f, 4);
  CHECK(p.code_min() == -8);
  CHECK(p.code_max() == 7);
  // Every code is reachable and nothing escapes [-8, 7].
  std::vector<int> hits(16, 0);
  for (int code = -8; code <= 7; ++code) {
    const float x = dequantize_value(code, p);
    const auto back = quantize_value(x, p);
    CHECK(back == code);
    ++hits[static_cast<std::size_t>(back + 8)];
  }
  for (int h : hits) CHECK(h == 1);
  for (float x = -100.0f; x <= 100.0f; x += 0.01f) {
    const auto c = quantize_value(x, p);
    CHECK((c >= -8 && c <= 7));
  }
}

TEST_CASE("per-channel parameters never do worse than the per-tensor bound") {
  // Brute force over small random matrices whose rows have different ranges.
  std::mt19937 rng(21);
  std::normal_distribution<float> n;
  for (int trial = 0; trial < 200; ++trial) {
    Tensor t({3, 5});
    for (std::size_t r = 0; r < 3; ++r) {
      const float spread = 0.1f + static_cast<float>(r) * 1.5f;
      for (float& v : t.row(r)) v = spread * n(rng);
    }
    for (int bits : {4, 6, 8}) {
      const auto whole = derive_params(t, bits)[0];
      const auto rows = derive_params(t, bits, Granularity::per_channel(0));
      const auto pc = dequantize(quantize(t, rows, 0));
      for (std::size_t r = 0; r < 3; ++r) {
        CHECK(rows[r].scale <= whole.scale * (1 + 1e-6f));
        float pc_max = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          const float e = std::abs(pc.at(r, c) - t.at(r, c));
          pc_max = std::max(pc_max, e);
        }
        CHECK(pc_max <= whole.scale / 2 + 1e-6f);
      }
    }
  }
}

TEST_CASE("per-channel quantize validates parameter count") {
  const auto t = Tensor::matrix({{1, 2}, {3, 4}});
  const auto rows = derive_params(t, 8, Granularity::per_channel(0));
  CHECK_NOTHROW(quantize(t, rows, 0));
  CHECK_THROWS_AS(quantize(t, std::span(rows).first(1), 0), DimensionError);
}
