#include "quantdistill/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "quantdistill/errors.hpp"

namespace quantdistill {

namespace {

std::mt19937_64 make_rng(std::uint64_t a, std::uint64_t b, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kPrototypes = 1, kMixing = 2, kSamples = 3, kNoise = 4 };

void add_noise(Tensor& latents, float sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0f) return;
  std::normal_distribution<float> noise(0.0f, sigma);
  for (float& v : latents.data()) v += noise(rng);
}

}  // namespace

IdentitySpace IdentitySpace::make(std::size_t n_identities, std::size_t latent_dim, std::size_t input_dim,
                                  float noise_sigma, std::uint64_t seed) {
  if (n_identities < 2) throw DomainError("identity space needs at least 2 identities");
  if (latent_dim < 2 || input_dim < 2) throw DomainError("identity space dims must be >= 2");
  if (!(noise_sigma >= 0.0f) || !std::isfinite(noise_sigma)) throw DomainError("noise_sigma must be >= 0");

  IdentitySpace s;
  s.noise_sigma_ = noise_sigma;
  s.seed_ = seed;

  auto rng = make_rng(seed, 0, kPrototypes);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  s.prototypes_ = Tensor({n_identities, latent_dim});
  for (std::size_t i = 0; i < n_identities; ++i) {
    auto row = s.prototypes_.row(i);
    float sq = 0.0f;
    do {
      sq = 0.0f;
      for (float& v : row) {
        v = normal(rng);
        sq += v * v;
      }
    } while (!(sq > 0.0f));
    const float norm = std::sqrt(sq);
    for (float& v : row) v /= norm;
  }

  auto mix_rng = make_rng(seed, 0, kMixing);
  s.mixing_ = Tensor({latent_dim, input_dim});
  for (float& v : s.mixing_.data()) v = normal(mix_rng);
  s.offset_ = Tensor({input_dim});
  std::normal_distribution<float> small(0.0f, 0.1f);
  for (float& v : s.offset_.data()) v = small(mix_rng);
  return s;
}

Tensor IdentitySpace::map(const Tensor& latents) const {
  Tensor out = matmul(latents, mixing_);
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = std::tanh(row[c] + offset_[c]);
  }
  return out;
}

Tensor latents_for(const IdentitySpace& space, std::span<const std::uint32_t> identities,
                   std::uint64_t seed) {
  if (identities.empty()) throw DomainError("batch size must be >= 1");
  Tensor lat({identities.size(), space.latent_dim()});
  for (std::size_t r = 0; r < identities.size(); ++r) {
    if (identities[r] >= space.n_identities()) throw DomainError("identity index out of range");
    auto src = space.prototypes().row(identities[r]);
    std::copy(src.begin(), src.end(), lat.row(r).begin());
  }
  auto rng = make_rng(space.seed(), seed, kNoise);
  add_noise(lat, space.noise_sigma(), rng);
  return lat;
}

LatentDraw draw_latents(const IdentitySpace& space, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw DomainError("batch size must be >= 1");
  auto rng = make_rng(space.seed(), seed, kSamples);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(space.n_identities() - 1));
  LatentDraw d;
  d.identities.resize(m);
  for (auto& id : d.identities) id = pick(rng);
  d.latents = latents_for(space, d.identities, seed);
  return d;
}

UnlabeledBatch sample_unlabeled(const IdentitySpace& space, std::size_t m, std::uint64_t seed) {
  return {space.map(draw_latents(space, m, seed).latents)};
}

Batch sample_labeled(const IdentitySpace& space, std::size_t m, std::uint64_t seed) {
  auto d = draw_latents(space, m, seed);
  return {space.map(d.latents), std::move(d.identities)};
}

UnlabeledBatch strip_labels(Batch batch) { return {std::move(batch.inputs)}; }

std::vector<std::uint8_t> encode_batch(const Batch& batch) {
  if (batch.inputs.rank() != 2) throw DimensionError("batch inputs must be [M, input_dim]");
  const std::size_t m = batch.inputs.dim(0);
  if (batch.labels && batch.labels->size() != m) throw DimensionError("label count does not match batch size");
  detail::ByteWriter w;
  w.bytes("QFDB");
  w.u16(kBatchFileVersion);
  w.u16(batch.labels ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(static_cast<std::uint32_t>(batch.inputs.dim(1)));
  for (float v : batch.inputs.data()) w.f32(v);
  if (batch.labels) {
    for (auto l : *batch.labels) w.u32(l);
  }
  return w.buffer();
}

Batch decode_batch(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "batch file");
  if (r.bytes(4, "magic") != "QFDB") throw FormatError("batch file: bad magic at byte offset 0");
  const auto version = r.u16("version");
  if (version != kBatchFileVersion) r.fail("unsupported version " + std::to_string(version));
  const auto flags = r.u16("flags");
  if (flags & ~std::uint16_t{1}) r.fail("unknown flag bits");
  const auto m = r.u32("batch size");
  const auto dim = r.u32("input_dim");
  if (m == 0) throw DomainError("batch file holds an empty batch (M = 0)");
  if (dim == 0) r.fail("input_dim is zero");
  const std::uint64_t count = std::uint64_t{m} * dim;
  const std::uint64_t need = count * 4 + ((flags & 1) ? std::uint64_t{m} * 4 : 0);
  if (r.remaining() < need) r.fail("truncated payload");
  std::vector<float> data(count);
  for (auto& v : data) v = r.f32("inputs");
  Batch b{Tensor({m, dim}, std::move(data)), std::nullopt};
  if (flags & 1) {
    std::vector<std::uint32_t> labels(m);
    for (auto& l : labels) l = r.u32("labels");
    b.labels = std::move(labels);
  }
  if (r.remaining() != 0) r.fail("trailing bytes");
  return b;
}

void save_tensor_file(const std::filesystem::path& path, const Batch& batch) {
  detail::write_file_atomic(path, encode_batch(batch));
}

Batch load_tensor_file(const std::filesystem::path& path) { return decode_batch(detail::read_file(path)); }

}  // namespace quantdistill
