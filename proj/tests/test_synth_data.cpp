#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "quantdistill/errors.hpp"
#include "quantdistill/synth_data.hpp"

using namespace quantdistill;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "quantdistill_test_synth";
  fs::create_directories(dir);
  return dir / name;
}

double row_norm(std::span<const float> r) {
  double s = 0.0;
  for (float v : r) s += double(v) * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("identity space construction") {
  const auto a = IdentitySpace::make(2, 8, 16, 0.1f, 5);
  CHECK(a.prototypes().shape() == Shape{2, 8});
  for (std::size_t r = 0; r < 2; ++r) CHECK(row_norm(a.prototypes().row(r)) == doctest::Approx(1.0).epsilon(1e-6));

  const auto b = IdentitySpace::make(2, 8, 16, 0.1f, 5);
  CHECK(a.prototypes() == b.prototypes());
  CHECK(a.mixing() == b.mixing());
  CHECK(a.offset() == b.offset());
  CHECK_FALSE(IdentitySpace::make(2, 8, 16, 0.1f, 6).prototypes() == a.prototypes());

  CHECK_THROWS_AS(IdentitySpace::make(1, 8, 16, 0.1f, 1), DomainError);
  CHECK_THROWS_AS(IdentitySpace::make(4, 1, 16, 0.1f, 1), DomainError);
  CHECK_THROWS_AS(IdentitySpace::make(4, 8, 1, 0.1f, 1), DomainError);
  CHECK_THROWS_AS(IdentitySpace::make(4, 8, 16, -0.1f, 1), DomainError);
}

TEST_CASE("mixing map is tanh of an affine map") {
  const auto space = IdentitySpace::make(10, 4, 6, 0.2f, 9);
  const auto draw = draw_latents(space, 5, 1);
  const auto x = space.map(draw.latents);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      double z = space.offset()[c];
      for (std::size_t k = 0; k < 4; ++k) z += double(draw.latents.at(r, k)) * space.mixing().at(k, c);
      CHECK(x.at(r, c) == doctest::Approx(std::tanh(z)).epsilon(1e-5));
    }
  }
}

TEST_CASE("unlabeled sampling") {
  const auto space = IdentitySpace::make(20, 16, 64, 0.15f, 1);
  const auto batch = sample_unlabeled(space, 64, 3);
  CHECK(batch.inputs.shape() == Shape{64, 64});
  CHECK(sample_unlabeled(space, 64, 3).inputs == batch.inputs);
  CHECK_FALSE(sample_unlabeled(space, 64, 4).inputs == batch.inputs);
  CHECK_THROWS_AS(sample_unlabeled(space, 0, 3), DomainError);
  // The unlabeled batch is the labeled batch without its labels.
  CHECK(sample_labeled(space, 64, 3).inputs == batch.inputs);
  CHECK(strip_labels(sample_labeled(space, 64, 3)).inputs == batch.inputs);
}

TEST_CASE("zero noise makes every sample of an identity identical") {
  const auto space = IdentitySpace::make(3, 8, 12, 0.0f, 2);
  const auto draw = draw_latents(space, 200, 7);
  for (std::size_t r = 0; r < 200; ++r) {
    const auto proto = space.prototypes().row(draw.identities[r]);
    const auto lat = draw.latents.row(r);
    CHECK(std::equal(proto.begin(), proto.end(), lat.begin()));
  }
}

TEST_CASE("labeled sampling") {
  const auto space = IdentitySpace::make(30, 16, 64, 0.15f, 11);
  const auto batch = sample_labeled(space, 500, 1);
  REQUIRE(batch.labels.has_value());
  CHECK(batch.labels->size() == 500);
  for (auto l : *batch.labels) CHECK(l < 30u);
  const auto one = sample_labeled(space, 1, 1);
  CHECK(one.inputs.shape() == Shape{1, 64});
  CHECK(one.labels->size() == 1);
}

TEST_CASE("same-identity latents are closer than different-identity latents") {
  const auto space = IdentitySpace::make(200, 16, 64, 0.15f, 42);
  const auto draw = draw_latents(space, 20000, 3);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, 19999);
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < 16; ++k) {
      const double d = double(draw.latents.at(a, k)) - draw.latents.at(b, k);
      s += d * d;
    }
    return std::sqrt(s);
  };
  // Same-identity pairs come from fresh draws of the same prototypes.
  const auto twins = latents_for(space, draw.identities, 99);
  double same = 0.0, diff = 0.0;
  std::size_t n_diff = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 16; ++k) {
      const double d = double(draw.latents.at(i, k)) - twins.at(i, k);
      s += d * d;
    }
    same += std::sqrt(s);
    const std::size_t a = pick(rng), b = pick(rng);
    if (draw.identities[a] != draw.identities[b]) {
      diff += dist(a, b);
      ++n_diff;
    }
  }
  CHECK(same / 10000 < diff / static_cast<double>(n_diff));
}

TEST_CASE("unlabeled inputs are bounded and finite") {
  const auto space = IdentitySpace::make(200, 16, 64, 0.15f, 42);
  const auto batch = sample_unlabeled(space, 10000, 8);
  CHECK(all_finite(batch.inputs));
  double mean = 0.0;
  std::size_t outside = 0;
  for (float v : batch.inputs.data()) {
    if (v < -1.0f || v > 1.0f) ++outside;
    mean += v;
  }
  CHECK(outside == 0);
  CHECK(std::isfinite(mean / static_cast<double>(batch.inputs.size())));
}

TEST_CASE("batch file round trip") {
  const auto space = IdentitySpace::make(5, 4, 6, 0.1f, 1);
  const auto labeled = sample_labeled(space, 9, 2);
  const auto path = scratch("labeled.qfdb");
  save_tensor_file(path, labeled);
  CHECK(load_tensor_file(path) == labeled);

  const Batch unlabeled{sample_unlabeled(space, 3, 2).inputs, std::nullopt};
  save_tensor_file(path, unlabeled);
  const auto back = load_tensor_file(path);
  CHECK(back == unlabeled);
  CHECK_FALSE(back.labels.has_value());

  const auto bytes = encode_batch(labeled);
  CHECK(bytes.size() == 4 + 2 + 2 + 4 + 4 + 9 * 6 * 4 + 9 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "QFDB");
}

TEST_CASE("malformed batch files") {
  const auto space = IdentitySpace::make(5, 4, 6, 0.1f, 1);
  auto bytes = encode_batch(sample_labeled(space, 4, 2));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    decode_batch(truncated);
    FAIL("truncated batch decoded");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_batch(bad_magic), FormatError);
  CHECK_THROWS_AS(decode_batch({}), FormatError);

  auto empty = bytes;
  empty.resize(16);
  empty[8] = empty[9] = empty[10] = empty[11] = 0;  // M = 0
  CHECK_THROWS_AS(decode_batch(empty), DomainError);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_batch(trailing), FormatError);

  CHECK_THROWS_AS(load_tensor_file(scratch("does_not_exist.qfdb")), IoError);
}
