#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "quantdistill/graph.hpp"
#include "quantdistill/synth_data.hpp"

namespace quantdistill {

struct DistillConfig {
  /// Iteration count of the full-scale recipe; the desk-scale default below
  /// scales it to the size of the synthetic task.
  static constexpr std::size_t kFullScaleIterations = 11000;

  std::size_t batch_size = 64;
  std::size_t iterations = 2000;
  float lr = 1e-4f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  int bit_width = 8;
  std::uint64_t seed = 0;
  std::size_t calibration_batches = 16;
  /// Produce the next batch on a worker thread while the current step runs.
  bool prefetch = true;

  void validate() const;
};

/// Unlabeled batch number `index` of a deterministic stream. Distillation only
/// ever sees inputs, never labels.
using UnlabeledSource = std::function<UnlabeledBatch(std::uint64_t index)>;

/// Stream of sample_unlabeled batches with per-index seeds derived from `seed`.
UnlabeledSource synthetic_source(IdentitySpace space, std::size_t batch_size, std::uint64_t seed);

/// 1 - (1/M) sum_i cos(student_i, teacher_i); in [0, 2].
double kd_loss(const Tensor& student, const Tensor& teacher);

/// Cosine similarity computed in double; exactly 1 for identical vectors.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Copy of `teacher` prepared for b-bit quantization (observers reset).
EmbeddingNet make_student(const EmbeddingNet& teacher, int bits);

/// Runs `n_batches` full-precision forward passes from batch index
/// `first_index` on, records every activation range and freezes the observed
/// ranges into activation parameters. The net's bit width must be set.
EmbeddingNet calibrate(EmbeddingNet net, const UnlabeledSource& data, std::size_t n_batches,
                       std::uint64_t first_index = 0);

struct KdStep {
  float loss = 0.0f;
  std::vector<float> weight_grad_norms;  // one per layer
};

/// One distillation step on a single batch: teacher FP forward, student
/// quantized forward, kd loss, STE backward, SGD update of the student.
KdStep distill_step(EmbeddingNet& student, const EmbeddingNet& teacher, const Tensor& inputs, Sgd& optimizer);

struct FinetuneResult {
  EmbeddingNet student;
  std::vector<float> loss_curve;
};

/// Fine-tunes a calibrated student against a frozen full-precision teacher.
/// Batches are drawn from `data` at indices cfg.calibration_batches and up,
/// so they do not repeat the calibration batches.
FinetuneResult finetune(EmbeddingNet student, const EmbeddingNet& teacher, const UnlabeledSource& data,
                        const DistillConfig& cfg);

/// Means of consecutive non-overlapping windows (the last window may be short).
std::vector<double> window_means(std::span<const float> curve, std::size_t window);
/// Mean of the last `window` entries.
double smoothed_final_loss(std::span<const float> curve, std::size_t window = 100);

/// `step,loss` rows with a header line.
std::string loss_curve_csv(std::span<const float> curve);

}  // namespace quantdistill
