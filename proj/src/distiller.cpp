#include "quantdistill/distiller.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <string>

#include "quantdistill/errors.hpp"

namespace quantdistill {

void DistillConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0f)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
  if (bit_width != 4 && bit_width != 6 && bit_width != 8) {
    throw ConfigError("bit width must be one of 4, 6, 8 (got " + std::to_string(bit_width) + ")");
  }
}

UnlabeledSource synthetic_source(IdentitySpace space, std::size_t batch_size, std::uint64_t seed) {
  return [space = std::move(space), batch_size, seed](std::uint64_t index) {
    // splitmix-style mixing keeps neighbouring indices decorrelated
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return sample_unlabeled(space, batch_size, z ^ (z >> 31));
  };
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw DomainError("cosine_similarity of a zero vector");
  return std::clamp(dot / std::sqrt(aa * bb), -1.0, 1.0);
}

double kd_loss(const Tensor& student, const Tensor& teacher) {
  if (student.rank() != 2 || student.shape() != teacher.shape()) {
    throw DimensionError("kd_loss: shapes " + shape_string(student.shape()) + " and " +
                         shape_string(teacher.shape()));
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < student.dim(0); ++r) sum += cosine_similarity(student.row(r), teacher.row(r));
  return std::clamp(1.0 - sum / static_cast<double>(student.dim(0)), 0.0, 2.0);
}

EmbeddingNet make_student(const EmbeddingNet& teacher, int bits) {
  EmbeddingNet student = teacher;
  student.set_bit_width(bits);
  return student;
}

EmbeddingNet calibrate(EmbeddingNet net, const UnlabeledSource& data, std::size_t n_batches,
                       std::uint64_t first_index) {
  if (n_batches == 0) throw StateError("calibration needs at least one batch");
  if (net.bit_width() == 0) throw StateError("calibration needs a bit width");
  net.set_bit_width(net.bit_width());  // fresh observers
  for (std::size_t i = 0; i < n_batches; ++i) {
    const auto batch = data(first_index + i);
    const auto pass = forward_embed(net, batch.inputs, ForwardMode::FullPrecision);
    auto observers = net.observers();
    for (std::size_t k = 0; k < pass.activations.size(); ++k) {
      observers[k].update(pass.tape.value(pass.activations[k]));
    }
  }
  net.freeze_activation_params();
  return net;
}

KdStep distill_step(EmbeddingNet& student, const EmbeddingNet& teacher, const Tensor& inputs, Sgd& optimizer) {
  const Tensor target = embed(teacher, inputs, ForwardMode::FullPrecision);
  auto pass = forward_embed(student, inputs, ForwardMode::Quantized);
  const auto loss = pass.tape.kd_loss(pass.embedding, target);
  KdStep step;
  step.loss = pass.tape.value(loss)[0];
  pass.tape.backward(loss);
  const ParamGrads grads = collect_grads(pass);
  for (const auto& g : grads.weight) {
    double sq = 0.0;
    for (float v : g.data()) sq += static_cast<double>(v) * v;
    step.weight_grad_norms.push_back(static_cast<float>(std::sqrt(sq)));
  }
  optimizer.step(student, grads);
  return step;
}

FinetuneResult finetune(EmbeddingNet student, const EmbeddingNet& teacher, const UnlabeledSource& data,
                        const DistillConfig& cfg) {
  cfg.validate();
  if (!student.calibrated()) throw StateError("student must be calibrated before fine-tuning");
  if (student.input_dim() != teacher.input_dim() || student.embedding_dim() != teacher.embedding_dim()) {
    throw DimensionError("teacher and student dimensions differ");
  }
  FinetuneResult result{std::move(student), {}};
  result.loss_curve.reserve(cfg.iterations);
  if (cfg.iterations == 0) return result;

  Sgd optimizer({cfg.lr, cfg.momentum, cfg.weight_decay});
  const std::uint64_t first = cfg.calibration_batches;
  // Batches are consumed strictly in index order; prefetching only changes
  // when a batch is produced, not which batch a step sees.
  auto fetch = [&data](std::uint64_t index) { return data(index); };
  std::future<UnlabeledBatch> next;
  if (cfg.prefetch) next = std::async(std::launch::async, fetch, first);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    UnlabeledBatch batch = cfg.prefetch ? next.get() : data(first + it);
    if (cfg.prefetch && it + 1 < cfg.iterations) next = std::async(std::launch::async, fetch, first + it + 1);
    result.loss_curve.push_back(distill_step(result.student, teacher, batch.inputs, optimizer).loss);
  }
  return result;
}

std::vector<double> window_means(std::span<const float> curve, std::size_t window) {
  if (window == 0) throw DomainError("window must be >= 1");
  std::vector<double> out;
  for (std::size_t start = 0; start < curve.size(); start += window) {
    const std::size_t end = std::min(curve.size(), start + window);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) sum += curve[i];
    out.push_back(sum / static_cast<double>(end - start));
  }
  return out;
}

double smoothed_final_loss(std::span<const float> curve, std::size_t window) {
  if (curve.empty()) throw DomainError("empty loss curve");
  const std::size_t n = std::min(window, curve.size());
  double sum = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) sum += curve[i];
  return sum / static_cast<double>(n);
}

std::string loss_curve_csv(std::span<const float> curve) {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i] << '\n';
  return os.str();
}

}  // namespace quantdistill
