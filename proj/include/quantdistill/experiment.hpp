#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quantdistill/bench_eval.hpp"
#include "quantdistill/distiller.hpp"
#include "quantdistill/model_store.hpp"

namespace quantdistill {

/// Everything one end-to-end run needs. Parsed from a flat `key = value`
/// text file; `#` starts a comment. Unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 42;

  // synthetic identity space
  std::size_t n_identities = 200;
  std::size_t latent_dim = 16;
  std::size_t input_dim = 64;
  float noise_sigma = 0.15f;

  // embedding network: input -> hidden_dim x hidden_layers -> embedding_dim
  std::size_t hidden_dim = 64;
  std::size_t hidden_layers = 2;
  std::size_t embedding_dim = 32;

  // teacher pretraining (labeled, softmax cross-entropy)
  std::size_t teacher_iterations = 3000;
  std::size_t teacher_batch_size = 64;
  float teacher_lr = 0.1f;
  float teacher_momentum = 0.9f;
  float teacher_weight_decay = 5e-4f;

  // quantization + distillation (unlabeled)
  DistillConfig distill;
  std::vector<int> bit_widths{6, 8};
  std::size_t smoothing_window = 100;
  /// Smoothed final KD loss above which a student is reported as not
  /// converged when the run has no 6-bit student to compare against.
  double nonconvergence_loss = 0.05;
  double nonconvergence_factor = 2.0;

  // evaluation
  std::size_t n_pairs = 2000;
  std::vector<double> far_targets{0.01};

  std::filesystem::path output_dir = "out";

  std::vector<std::size_t> architecture() const;
  /// ConfigError naming the offending field.
  void validate() const;
};

/// Parses config text. Keys absent from the text keep their defaults.
ExperimentConfig parse_config(std::string_view text);
/// Reads and parses a config file, then applies QUANTDISTILL_SEED if set.
ExperimentConfig load_config(const std::filesystem::path& path);
std::string render_config(const ExperimentConfig& cfg);

/// Named sub-seed ("teacher", "data", "distill", "pairs", ...) of the run seed.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view name);

IdentitySpace make_space(const ExperimentConfig& cfg);
PairSet make_pairs(const ExperimentConfig& cfg, const IdentitySpace& space);
/// Unlabeled stream used for calibration and fine-tuning.
UnlabeledSource distill_source(const ExperimentConfig& cfg, const IdentitySpace& space);

using Log = std::function<void(const std::string&)>;

struct TeacherResult {
  EmbeddingNet teacher;
  std::vector<float> loss_curve;
  VerificationReport report;
};

/// Trains the full-precision teacher with a softmax head on labeled samples.
TeacherResult train_teacher(const ExperimentConfig& cfg, const Log& log = {});

struct StudentResult {
  int bits = 0;
  EmbeddingNet student;
  std::vector<float> loss_curve;
  double smoothed_final_loss = 0.0;
  bool converged = true;
  SizeReport size;
  VerificationReport report;
};

/// Calibrates and fine-tunes one student per bit width against `teacher`.
std::vector<StudentResult> distill_students(const ExperimentConfig& cfg, const EmbeddingNet& teacher,
                                            std::span<const int> bit_widths, const Log& log = {});

// Commands. Each writes its artifacts into cfg.output_dir and returns the
// paths it wrote.

/// teacher.qfmd, teacher_loss.csv, teacher_report.json
std::vector<std::filesystem::path> cmd_pretrain(const ExperimentConfig& cfg, const Log& log = {});

/// student_w<b>.qfmd, loss_w<b>.csv, size_w<b>.json per bit width, and
/// distill_summary.json. An empty `bit_widths` uses the config list.
std::vector<std::filesystem::path> cmd_distill(const ExperimentConfig& cfg, const std::filesystem::path& teacher_path,
                                               std::span<const int> bit_widths, const Log& log = {});

/// eval_report.json and ranges.csv. Duplicate paths are evaluated once.
std::vector<std::filesystem::path> cmd_eval(const ExperimentConfig& cfg,
                                            std::span<const std::filesystem::path> model_paths,
                                            const Log& log = {});

}  // namespace quantdistill
