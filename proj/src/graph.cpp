#include "quantdistill/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "quantdistill/errors.hpp"

namespace quantdistill {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void accumulate(Tensor& into, const Tensor& delta) {
  auto dst = into.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

// ---------------------------------------------------------------- GradTape

GradTape::NodeId GradTape::push(Tensor value, std::function<void(GradTape&, const Node&)> backward) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backward)});
  return nodes_.size() - 1;
}

const Tensor& GradTape::value(NodeId id) const { return nodes_.at(id).value; }

Tensor& GradTape::grad_slot(NodeId id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor GradTape::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

GradTape::NodeId GradTape::input(Tensor value) { return push(std::move(value)); }
GradTape::NodeId GradTape::parameter(Tensor value) { return push(std::move(value)); }

GradTape::NodeId GradTape::linear(NodeId x, NodeId weight, NodeId bias) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(weight);
  const Tensor& bv = value(bias);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(1) ||
      bv.dim(0) != wv.dim(0)) {
    throw DimensionError("linear: x " + shape_string(xv.shape()) + ", W " + shape_string(wv.shape()) +
                         ", b " + shape_string(bv.shape()));
  }
  Tensor out = matmul(xv, transpose(wv));
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return push(std::move(out), [x, weight, bias](GradTape& t, const Node& self) {
    const Tensor& dy = self.grad;
    accumulate(t.grad_slot(x), matmul(dy, t.value(weight)));
    accumulate(t.grad_slot(weight), matmul(transpose(dy), t.value(x)));
    Tensor db(t.value(bias).shape());
    for (std::size_t r = 0; r < dy.dim(0); ++r) {
      auto row = dy.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    accumulate(t.grad_slot(bias), db);
  });
}

GradTape::NodeId GradTape::relu(NodeId x) {
  return push(quantdistill::relu(value(x)), [x](GradTape& t, const Node& self) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_slot(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0f) gx[i] += self.grad[i];
    }
  });
}

Tensor fake_quant_backward(const Tensor& x, const Tensor& upstream, const QuantParams& params) {
  require_same_shape(x, upstream, "fake_quant_backward");
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = params.contains(x[i]) ? upstream[i] : 0.0f;
  return g;
}

GradTape::NodeId GradTape::fake_quant(NodeId x, const QuantParams& params) {
  Tensor out = value(x);
  for (float& v : out.data()) v = fake_quantize_value(v, params);
  return push(std::move(out), [x, params](GradTape& t, const Node& self) {
    accumulate(t.grad_slot(x), fake_quant_backward(t.value(x), self.grad, params));
  });
}

GradTape::NodeId GradTape::fake_quant_rows(NodeId x, std::vector<QuantParams> row_params) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2 || row_params.size() != xv.dim(0)) {
    throw DimensionError("fake_quant_rows: " + std::to_string(row_params.size()) +
                         " parameter sets for shape " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    for (float& v : out.row(r)) v = fake_quantize_value(v, row_params[r]);
  }
  return push(std::move(out), [x, row_params = std::move(row_params)](GradTape& t, const Node& self) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_slot(x);
    const std::size_t cols = xv.dim(1);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (row_params[i / cols].contains(xv[i])) gx[i] += self.grad[i];
    }
  });
}

GradTape::NodeId GradTape::l2_normalize(NodeId x) {
  return push(quantdistill::l2_normalize(value(x)), [x](GradTape& t, const Node& self) {
    // y = x / |x|;  dx = (dy - y * <y, dy>) / |x|
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_slot(x);
    const std::size_t d = xv.dim(1);
    for (std::size_t r = 0; r < xv.dim(0); ++r) {
      auto xr = xv.row(r);
      auto yr = self.value.row(r);
      auto dy = self.grad.row(r);
      float sq = 0.0f;
      for (float v : xr) sq += v * v;
      const float norm = std::sqrt(sq);
      float dot = 0.0f;
      for (std::size_t c = 0; c < d; ++c) dot += yr[c] * dy[c];
      auto g = gx.row(r);
      for (std::size_t c = 0; c < d; ++c) g[c] += (dy[c] - yr[c] * dot) / norm;
    }
  });
}

GradTape::NodeId GradTape::kd_loss(NodeId student, Tensor teacher) {
  const Tensor& s = value(student);
  if (s.rank() != 2) throw DimensionError("kd_loss expects [M,d], got " + shape_string(s.shape()));
  require_same_shape(s, teacher, "kd_loss");
  const std::size_t m = s.dim(0), d = s.dim(1);

  // cos_i and the per-row terms needed by the gradient, in double.
  std::vector<double> cosines(m), s_norm(m), t_norm(m);
  double cos_sum = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    double dot = 0.0, ss = 0.0, tt = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double a = s.at(r, c), b = teacher.at(r, c);
      dot += a * b;
      ss += a * a;
      tt += b * b;
    }
    if (!(ss > 0.0) || !(tt > 0.0)) throw DomainError("kd_loss: row " + std::to_string(r) + " has zero norm");
    s_norm[r] = std::sqrt(ss);
    t_norm[r] = std::sqrt(tt);
    cosines[r] = std::clamp(dot / std::sqrt(ss * tt), -1.0, 1.0);
    cos_sum += cosines[r];
  }
  const double loss = 1.0 - cos_sum / static_cast<double>(m);
  Tensor out({1}, static_cast<float>(std::clamp(loss, 0.0, 2.0)));

  return push(std::move(out), [student, teacher = std::move(teacher), cosines = std::move(cosines),
                               s_norm = std::move(s_norm), t_norm = std::move(t_norm)](
                                  GradTape& t, const Node& self) {
    // d cos / d s = t / (|s||t|) - cos * s / |s|^2
    const Tensor& sv = t.value(student);
    Tensor& gs = t.grad_slot(student);
    const std::size_t m = sv.dim(0), d = sv.dim(1);
    const double scale = -static_cast<double>(self.grad[0]) / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double dcos = teacher.at(r, c) / (s_norm[r] * t_norm[r]) -
                            cosines[r] * sv.at(r, c) / (s_norm[r] * s_norm[r]);
        gs.at(r, c) += static_cast<float>(scale * dcos);
      }
    }
  });
}

GradTape::NodeId GradTape::weighted_sum(NodeId x, Tensor weights) {
  const Tensor& v = value(x);
  require_same_shape(v, weights, "weighted_sum");
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += static_cast<double>(v[i]) * weights[i];
  return push(Tensor({1}, static_cast<float>(total)), [x, weights = std::move(weights)](GradTape& t, const Node& self) {
    Tensor& g = t.grad_slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * weights[i];
  });
}

GradTape::NodeId GradTape::softmax_cross_entropy(NodeId logits, std::vector<std::uint32_t> labels) {
  const Tensor& z = value(logits);
  if (z.rank() != 2 || labels.size() != z.dim(0)) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_string(z.shape()) + " with " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t m = z.dim(0), classes = z.dim(1);
  Tensor probs(z.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] >= classes) throw DomainError("label " + std::to_string(labels[r]) + " out of range");
    auto zr = z.row(r);
    const float mx = *std::max_element(zr.begin(), zr.end());
    double denom = 0.0;
    for (float v : zr) denom += std::exp(static_cast<double>(v - mx));
    auto pr = probs.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      pr[c] = static_cast<float>(std::exp(static_cast<double>(zr[c] - mx)) / denom);
    }
    total += std::log(denom) - static_cast<double>(zr[labels[r]] - mx);
  }
  Tensor out({1}, static_cast<float>(total / static_cast<double>(m)));
  return push(std::move(out), [logits, labels = std::move(labels), probs = std::move(probs)](
                                  GradTape& t, const Node& self) {
    Tensor& g = t.grad_slot(logits);
    const std::size_t m = probs.dim(0);
    const float scale = self.grad[0] / static_cast<float>(m);
    for (std::size_t r = 0; r < m; ++r) {
      auto pr = probs.row(r);
      auto gr = g.row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) {
        gr[c] += scale * (pr[c] - (c == labels[r] ? 1.0f : 0.0f));
      }
    }
  });
}

void GradTape::backward(NodeId root) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  if (root >= nodes_.size()) throw DomainError("backward: unknown node");
  if (nodes_[root].value.size() != 1) {
    throw DimensionError("backward root must be a scalar, got " + shape_string(nodes_[root].value.shape()));
  }
  consumed_ = true;
  grad_slot(root)[0] = 1.0f;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, n);
  }
}

// ------------------------------------------------------------ EmbeddingNet

EmbeddingNet EmbeddingNet::create(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionError("an embedding net needs at least input and output dims");
  for (auto d : dims) {
    if (d == 0) throw DimensionError("layer dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  EmbeddingNet net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const bool last = l + 2 == dims.size();
    std::normal_distribution<float> init(0.0f, std::sqrt((last ? 1.0f : 2.0f) / static_cast<float>(in)));
    LinearLayer layer{Tensor({out, in}), Tensor({out}), std::nullopt};
    for (float& w : layer.weight.data()) w = init(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::size_t EmbeddingNet::input_dim() const {
  if (layers.empty()) throw StateError("empty embedding net");
  return layers.front().weight.dim(1);
}

std::size_t EmbeddingNet::embedding_dim() const {
  if (layers.empty()) throw StateError("empty embedding net");
  return layers.back().weight.dim(0);
}

std::vector<std::size_t> EmbeddingNet::dims() const {
  std::vector<std::size_t> out{input_dim()};
  for (const auto& l : layers) out.push_back(l.weight.dim(0));
  return out;
}

std::uint64_t EmbeddingNet::weight_count() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.weight.size();
  return n;
}

std::uint64_t EmbeddingNet::bias_count() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.bias.size();
  return n;
}

void EmbeddingNet::set_bit_width(int bits) {
  require_bit_width(bits);
  bit_width_ = bits;
  observers_.assign(layers.size(), RangeObserver{});
  activation_params_.clear();
  for (auto& l : layers) l.frozen_weight_params.reset();
}

void EmbeddingNet::freeze_activation_params() {
  if (bit_width_ == 0) throw StateError("bit width not set");
  std::vector<QuantParams> params;
  for (const auto& o : observers_) params.push_back(o.freeze(bit_width_));
  activation_params_ = std::move(params);
}

void EmbeddingNet::set_activation_params(std::vector<QuantParams> params) {
  if (params.size() != layers.size()) {
    throw DimensionError("expected " + std::to_string(layers.size()) + " activation parameter sets");
  }
  for (const auto& p : params) {
    require_bit_width(p.bit_width);
    if (p.bit_width != params.front().bit_width) throw DomainError("mixed activation bit widths");
  }
  bit_width_ = params.front().bit_width;
  observers_.assign(layers.size(), RangeObserver{});
  activation_params_ = std::move(params);
}

void EmbeddingNet::clear_quantization() {
  bit_width_ = 0;
  observers_.clear();
  activation_params_.clear();
  for (auto& l : layers) l.frozen_weight_params.reset();
}

std::vector<QuantParams> EmbeddingNet::weight_params(std::size_t layer) const {
  const auto& l = layers.at(layer);
  if (l.frozen_weight_params) return *l.frozen_weight_params;
  if (bit_width_ == 0) throw StateError("bit width not set");
  return derive_params(l.weight, bit_width_, Granularity::per_channel(0));
}

void EmbeddingNet::validate() const {
  if (layers.empty()) throw DimensionError("embedding net has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.dim(0) != l.weight.dim(0)) {
      throw DimensionError("layer " + std::to_string(i) + " has inconsistent weight/bias shapes");
    }
    if (i > 0 && layers[i - 1].weight.dim(0) != l.weight.dim(1)) {
      throw DimensionError("layer " + std::to_string(i) + " input does not match previous output");
    }
  }
}

// ----------------------------------------------------------------- forward

EmbedPass forward_embed(const EmbeddingNet& net, const Tensor& x, ForwardMode mode) {
  net.validate();
  const bool quantized = mode == ForwardMode::Quantized;
  if (quantized && !net.calibrated()) {
    throw StateError("quantized forward requires calibrated activation ranges");
  }
  if (x.rank() != 2 || x.dim(1) != net.input_dim()) {
    throw DimensionError("forward_embed: input " + shape_string(x.shape()) + " for input dim " +
                         std::to_string(net.input_dim()));
  }
  EmbedPass pass;
  GradTape& tape = pass.tape;
  auto h = tape.input(x);
  const std::size_t n = net.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = net.layers[i];
    auto w = tape.parameter(layer.weight);
    auto b = tape.parameter(layer.bias);
    pass.weights.push_back(w);
    pass.biases.push_back(b);
    if (quantized) w = tape.fake_quant_rows(w, net.weight_params(i));
    h = tape.linear(h, w, b);
    if (i + 1 < n) h = tape.relu(h);
    pass.activations.push_back(h);
    if (quantized) h = tape.fake_quant(h, net.activation_params()[i]);
  }
  pass.pre_norm = h;
  pass.embedding = tape.l2_normalize(h);
  return pass;
}

Tensor embed(const EmbeddingNet& net, const Tensor& x, ForwardMode mode) {
  auto pass = forward_embed(net, x, mode);
  return pass.output();
}

ParamGrads collect_grads(const EmbedPass& pass) {
  ParamGrads g;
  for (auto id : pass.weights) g.weight.push_back(pass.tape.grad(id));
  for (auto id : pass.biases) g.bias.push_back(pass.tape.grad(id));
  return g;
}

// --------------------------------------------------------------------- SGD

void Sgd::update(Tensor& param, const Tensor& grad, Tensor& velocity) {
  require_same_shape(param, grad, "sgd_step");
  if (velocity.empty()) velocity = Tensor(param.shape());
  auto w = param.data();
  auto g = grad.data();
  auto v = velocity.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = config_.momentum * v[i] + g[i] + config_.weight_decay * w[i];
    w[i] -= config_.lr * v[i];
  }
}

void Sgd::step(EmbeddingNet& net, const ParamGrads& grads) {
  if (grads.weight.size() != net.layers.size() || grads.bias.size() != net.layers.size()) {
    throw DimensionError("sgd_step: gradient count does not match layer count");
  }
  velocity_w_.resize(net.layers.size());
  velocity_b_.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& layer = net.layers[i];
    update(layer.weight, grads.weight[i], velocity_w_[i]);
    update(layer.bias, grads.bias[i], velocity_b_[i]);
    // quantized views are re-derived from the updated shadow weights
    layer.frozen_weight_params.reset();
  }
}

void Sgd::step_extra(std::size_t slot, Tensor& param, const Tensor& grad) {
  if (velocity_extra_.size() <= slot) velocity_extra_.resize(slot + 1);
  update(param, grad, velocity_extra_[slot]);
}

}  // namespace quantdistill
