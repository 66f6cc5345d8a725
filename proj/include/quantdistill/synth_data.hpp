#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "quantdistill/tensor.hpp"

namespace quantdistill {

/// Procedural source of identity-structured samples.
///
/// Each identity owns a unit-norm prototype in latent space. A sample is its
/// prototype plus isotropic Gaussian noise, pushed through a fixed random
/// affine map and an elementwise tanh. Everything is a pure function of the
/// construction seed.
class IdentitySpace {
 public:
  static IdentitySpace make(std::size_t n_identities, std::size_t latent_dim, std::size_t input_dim,
                            float noise_sigma, std::uint64_t seed);

  std::size_t n_identities() const noexcept { return prototypes_.dim(0); }
  std::size_t latent_dim() const noexcept { return prototypes_.dim(1); }
  std::size_t input_dim() const noexcept { return mixing_.dim(1); }
  float noise_sigma() const noexcept { return noise_sigma_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const Tensor& prototypes() const noexcept { return prototypes_; }
  const Tensor& mixing() const noexcept { return mixing_; }
  const Tensor& offset() const noexcept { return offset_; }

  /// tanh(latents * mixing + offset) for latents [M, latent_dim].
  Tensor map(const Tensor& latents) const;

 private:
  Tensor prototypes_;  // [n_identities, latent_dim]
  Tensor mixing_;      // [latent_dim, input_dim]
  Tensor offset_;      // [input_dim]
  float noise_sigma_ = 0.0f;
  std::uint64_t seed_ = 0;
};

/// Samples as consumed by distillation: inputs only.
struct UnlabeledBatch {
  Tensor inputs;
};

/// Samples as stored on disk and used for teacher pretraining.
struct Batch {
  Tensor inputs;
  std::optional<std::vector<std::uint32_t>> labels;

  bool operator==(const Batch&) const = default;
};

/// Drops labels, if any.
UnlabeledBatch strip_labels(Batch batch);

/// Pre-map draw: identities and noisy latents.
struct LatentDraw {
  std::vector<std::uint32_t> identities;
  Tensor latents;  // [M, latent_dim]
};

LatentDraw draw_latents(const IdentitySpace& space, std::size_t m, std::uint64_t seed);
/// Latents of the given identities with fresh noise.
Tensor latents_for(const IdentitySpace& space, std::span<const std::uint32_t> identities,
                   std::uint64_t seed);

UnlabeledBatch sample_unlabeled(const IdentitySpace& space, std::size_t m, std::uint64_t seed);
Batch sample_labeled(const IdentitySpace& space, std::size_t m, std::uint64_t seed);

/// Raw batch file: "QFDB", u16 version, u16 flags (bit 0 = labels), u32 M,
/// u32 input_dim, M*input_dim f32, then M u32 labels when flagged.
/// All little-endian.
inline constexpr std::uint16_t kBatchFileVersion = 1;

void save_tensor_file(const std::filesystem::path& path, const Batch& batch);
Batch load_tensor_file(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_batch(const Batch& batch);
Batch decode_batch(const std::vector<std::uint8_t>& bytes);

}  // namespace quantdistill
