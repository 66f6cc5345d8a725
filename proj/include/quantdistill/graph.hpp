#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "quantdistill/quantizer.hpp"
#include "quantdistill/tensor.hpp"

namespace quantdistill {

/// Records one forward pass as a list of tensor-valued nodes and replays it in
/// reverse to accumulate gradients. Nodes are appended in evaluation order, so
/// the recording order is already a topological order.
class GradTape {
 public:
  using NodeId = std::size_t;

  /// Constant input; gradients are still accumulated but never consumed.
  NodeId input(Tensor value);
  NodeId parameter(Tensor value);

  /// x [M,in] * W[out,in]^T + b[out]
  NodeId linear(NodeId x, NodeId weight, NodeId bias);
  NodeId relu(NodeId x);
  /// Quantize-dequantize with a straight-through backward: the upstream
  /// gradient passes where range_lo <= x <= range_hi and is zero elsewhere.
  NodeId fake_quant(NodeId x, const QuantParams& params);
  /// Same as fake_quant with one parameter set per row of a rank-2 tensor.
  NodeId fake_quant_rows(NodeId x, std::vector<QuantParams> row_params);
  NodeId l2_normalize(NodeId x);
  /// 1 - mean_i cos(student_i, teacher_i). The teacher side is a constant.
  NodeId kd_loss(NodeId student, Tensor teacher);
  /// sum_i x_i * weights_i as a scalar; a fixed linear readout.
  NodeId weighted_sum(NodeId x, Tensor weights);
  /// Mean softmax cross-entropy of logits [M,C] against integer labels.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<std::uint32_t> labels);

  const Tensor& value(NodeId id) const;
  /// Gradient accumulated by backward(); zeros for nodes the root does not reach.
  Tensor grad(NodeId id) const;

  /// Propagates d(root)/d(node) to every node recorded before `root`. The root
  /// must hold a single element. A tape can be replayed only once.
  void backward(NodeId root);
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(GradTape&, const Node&)> backward;
  };

  NodeId push(Tensor value, std::function<void(GradTape&, const Node&)> backward = {});
  Tensor& grad_slot(NodeId id);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Straight-through gradient of a fake-quant node, exposed for direct checks.
Tensor fake_quant_backward(const Tensor& x, const Tensor& upstream, const QuantParams& params);

struct LinearLayer {
  Tensor weight;  // [out, in], full-precision shadow copy
  Tensor bias;    // [out], never quantized
  /// Weight parameters restored from a quantized model file. When absent the
  /// parameters are derived from the live shadow weights on every forward.
  std::optional<std::vector<QuantParams>> frozen_weight_params;
};

/// Stack of linear layers with relu between consecutive layers and an L2
/// normalized head.
///
/// Quantized mode fake-quantizes every weight matrix per output channel and
/// every activation (after each relu and after the last linear layer) with
/// parameters frozen from calibration. The normalized embedding itself is
/// left in full precision.
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  /// dims = {input, hidden..., embedding}; He-normal weights, zero biases.
  static EmbeddingNet create(std::span<const std::size_t> dims, std::uint64_t seed);

  std::vector<LinearLayer> layers;

  std::size_t input_dim() const;
  std::size_t embedding_dim() const;
  std::vector<std::size_t> dims() const;
  /// Number of weight entries (the quantized payload); biases excluded.
  std::uint64_t weight_count() const;
  std::uint64_t bias_count() const;

  /// Quantization setup: bit width plus one observer and one frozen parameter
  /// set per activation quantization point (one per layer).
  int bit_width() const noexcept { return bit_width_; }
  void set_bit_width(int bits);
  bool calibrated() const noexcept { return !activation_params_.empty(); }
  std::span<RangeObserver> observers() noexcept { return observers_; }
  std::span<const RangeObserver> observers() const noexcept { return observers_; }
  std::span<const QuantParams> activation_params() const noexcept { return activation_params_; }
  void freeze_activation_params();
  void set_activation_params(std::vector<QuantParams> params);
  void clear_quantization();

  /// Weight quantization parameters a quantized forward would use right now.
  std::vector<QuantParams> weight_params(std::size_t layer) const;

  /// Throws DimensionError unless consecutive layers compose.
  void validate() const;

 private:
  int bit_width_ = 0;
  std::vector<RangeObserver> observers_;
  std::vector<QuantParams> activation_params_;
};

enum class ForwardMode { FullPrecision, Quantized };

/// One recorded forward pass.
struct EmbedPass {
  GradTape tape;
  GradTape::NodeId embedding = 0;  // L2-normalized [M,d]
  GradTape::NodeId pre_norm = 0;   // [M,d] before normalization
  std::vector<GradTape::NodeId> weights;
  std::vector<GradTape::NodeId> biases;
  /// Values seen at each activation quantization point (before fake-quant).
  std::vector<GradTape::NodeId> activations;

  const Tensor& output() const { return tape.value(embedding); }
};

EmbedPass forward_embed(const EmbeddingNet& net, const Tensor& x, ForwardMode mode);

/// Embeddings only, without keeping the tape.
Tensor embed(const EmbeddingNet& net, const Tensor& x, ForwardMode mode);

struct ParamGrads {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;
};

/// Gradients of the parameters recorded in `pass` after backward().
ParamGrads collect_grads(const EmbedPass& pass);

struct SgdConfig {
  float lr = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
};

/// SGD with momentum and L2 weight decay on the shadow weights:
///   v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v
class Sgd {
 public:
  explicit Sgd(SgdConfig config) : config_(config) {}

  void step(EmbeddingNet& net, const ParamGrads& grads);
  /// Same update for a free-standing parameter (e.g. a classifier head).
  void step_extra(std::size_t slot, Tensor& param, const Tensor& grad);

  const SgdConfig& config() const noexcept { return config_; }
  void set_lr(float lr) noexcept { config_.lr = lr; }

 private:
  void update(Tensor& param, const Tensor& grad, Tensor& velocity);

  SgdConfig config_;
  std::vector<Tensor> velocity_w_;
  std::vector<Tensor> velocity_b_;
  std::vector<Tensor> velocity_extra_;
};

}  // namespace quantdistill
