#include "quantdistill/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "quantdistill/errors.hpp"

namespace quantdistill {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ------------------------------------------------------------------ config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for floats is not available on every toolchain we target
    char* end = nullptr;
    const double v = std::strtod(first, &end);
    if (end != last || value.empty() || !std::isfinite(v)) {
      throw ConfigError("config field '" + key + "': expected a number, got '" + value + "'");
    }
    out = static_cast<T>(v);
  } else {
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError("config field '" + key + "': expected an integer, got '" + value + "'");
    }
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw ConfigError("config field '" + key + "': empty list");
  return out;
}

void require(bool ok, const char* field, const std::string& msg) {
  if (!ok) throw ConfigError(std::string("config field '") + field + "': " + msg);
}

}  // namespace

std::vector<std::size_t> ExperimentConfig::architecture() const {
  std::vector<std::size_t> dims{input_dim};
  for (std::size_t i = 0; i < hidden_layers; ++i) dims.push_back(hidden_dim);
  dims.push_back(embedding_dim);
  return dims;
}

void ExperimentConfig::validate() const {
  require(n_identities >= 2, "n_identities", "verification needs at least 2 identities");
  require(latent_dim >= 2, "latent_dim", "must be >= 2");
  require(input_dim >= 2, "input_dim", "must be >= 2");
  require(noise_sigma >= 0.0f, "noise_sigma", "must be >= 0");
  require(hidden_dim >= 1, "hidden_dim", "must be >= 1");
  require(embedding_dim >= 2, "embedding_dim", "must be >= 2");
  require(teacher_batch_size >= 1, "teacher_batch_size", "must be >= 1");
  require(teacher_lr > 0.0f, "teacher_lr", "must be positive");
  require(teacher_momentum >= 0.0f && teacher_momentum < 1.0f, "teacher_momentum", "must be in [0, 1)");
  require(teacher_weight_decay >= 0.0f, "teacher_weight_decay", "must be >= 0");
  require(distill.batch_size >= 1, "batch_size", "must be >= 1");
  require(distill.lr > 0.0f, "lr", "must be positive");
  require(distill.momentum >= 0.0f && distill.momentum < 1.0f, "momentum", "must be in [0, 1)");
  require(distill.weight_decay >= 0.0f, "weight_decay", "must be >= 0");
  require(distill.calibration_batches >= 1, "calibration_batches", "must be >= 1");
  require(!bit_widths.empty(), "bits", "needs at least one bit width");
  for (int b : bit_widths) require(b == 4 || b == 6 || b == 8, "bits", "must be 4, 6 or 8 (got " + std::to_string(b) + ")");
  require(smoothing_window >= 1, "smoothing_window", "must be >= 1");
  require(nonconvergence_loss > 0.0, "nonconvergence_loss", "must be positive");
  require(nonconvergence_factor >= 1.0, "nonconvergence_factor", "must be >= 1");
  require(n_pairs >= 2 && n_pairs % 2 == 0, "n_pairs", "must be even and >= 2");
  require(!far_targets.empty(), "far_targets", "needs at least one target");
  for (double f : far_targets) require(f > 0.0 && f < 1.0, "far_targets", "must lie in (0, 1)");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> fields;
  auto size_field = [&](const char* name, std::size_t& slot) {
    fields[name] = [&slot](const std::string& k, const std::string& v) { slot = parse_number<std::size_t>(k, v); };
  };
  auto float_field = [&](const char* name, float& slot) {
    fields[name] = [&slot](const std::string& k, const std::string& v) { slot = parse_number<float>(k, v); };
  };
  auto double_field = [&](const char* name, double& slot) {
    fields[name] = [&slot](const std::string& k, const std::string& v) { slot = parse_number<double>(k, v); };
  };
  fields["seed"] = [&](const std::string& k, const std::string& v) { cfg.seed = parse_number<std::uint64_t>(k, v); };
  size_field("n_identities", cfg.n_identities);
  size_field("latent_dim", cfg.latent_dim);
  size_field("input_dim", cfg.input_dim);
  float_field("noise_sigma", cfg.noise_sigma);
  size_field("hidden_dim", cfg.hidden_dim);
  size_field("hidden_layers", cfg.hidden_layers);
  size_field("embedding_dim", cfg.embedding_dim);
  size_field("teacher_iterations", cfg.teacher_iterations);
  size_field("teacher_batch_size", cfg.teacher_batch_size);
  float_field("teacher_lr", cfg.teacher_lr);
  float_field("teacher_momentum", cfg.teacher_momentum);
  float_field("teacher_weight_decay", cfg.teacher_weight_decay);
  size_field("batch_size", cfg.distill.batch_size);
  size_field("iterations", cfg.distill.iterations);
  float_field("lr", cfg.distill.lr);
  float_field("momentum", cfg.distill.momentum);
  float_field("weight_decay", cfg.distill.weight_decay);
  size_field("calibration_batches", cfg.distill.calibration_batches);
  fields["bits"] = [&](const std::string& k, const std::string& v) { cfg.bit_widths = parse_list<int>(k, v); };
  size_field("smoothing_window", cfg.smoothing_window);
  double_field("nonconvergence_loss", cfg.nonconvergence_loss);
  double_field("nonconvergence_factor", cfg.nonconvergence_factor);
  size_field("n_pairs", cfg.n_pairs);
  fields["far_targets"] = [&](const std::string& k, const std::string& v) { cfg.far_targets = parse_list<double>(k, v); };
  fields["output_dir"] = [&](const std::string&, const std::string& v) { cfg.output_dir = v; };

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(stripped.substr(0, eq));
    const auto value = trim(stripped.substr(eq + 1));
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("config field '" + key + "': unknown key");
    if (!seen.insert(key).second) throw ConfigError("config field '" + key + "': given twice");
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_config(ss.str());
  if (const char* env = std::getenv("QUANTDISTILL_SEED"); env && *env) {
    cfg.seed = parse_number<std::uint64_t>("QUANTDISTILL_SEED", env);
  }
  return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(9);
  auto list = [](const auto& v) {
    std::ostringstream s;
    s.precision(9);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  os << "seed = " << cfg.seed << '\n'
     << "n_identities = " << cfg.n_identities << '\n'
     << "latent_dim = " << cfg.latent_dim << '\n'
     << "input_dim = " << cfg.input_dim << '\n'
     << "noise_sigma = " << cfg.noise_sigma << '\n'
     << "hidden_dim = " << cfg.hidden_dim << '\n'
     << "hidden_layers = " << cfg.hidden_layers << '\n'
     << "embedding_dim = " << cfg.embedding_dim << '\n'
     << "teacher_iterations = " << cfg.teacher_iterations << '\n'
     << "teacher_batch_size = " << cfg.teacher_batch_size << '\n'
     << "teacher_lr = " << cfg.teacher_lr << '\n'
     << "teacher_momentum = " << cfg.teacher_momentum << '\n'
     << "teacher_weight_decay = " << cfg.teacher_weight_decay << '\n'
     << "batch_size = " << cfg.distill.batch_size << '\n'
     << "iterations = " << cfg.distill.iterations << '\n'
     << "lr = " << cfg.distill.lr << '\n'
     << "momentum = " << cfg.distill.momentum << '\n'
     << "weight_decay = " << cfg.distill.weight_decay << '\n'
     << "calibration_batches = " << cfg.distill.calibration_batches << '\n'
     << "bits = " << list(cfg.bit_widths) << '\n'
     << "smoothing_window = " << cfg.smoothing_window << '\n'
     << "nonconvergence_loss = " << cfg.nonconvergence_loss << '\n'
     << "nonconvergence_factor = " << cfg.nonconvergence_factor << '\n'
     << "n_pairs = " << cfg.n_pairs << '\n'
     << "far_targets = " << list(cfg.far_targets) << '\n'
     << "output_dir = " << cfg.output_dir.string() << '\n';
  return os.str();
}

// ------------------------------------------------------------------- seeds

std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, then a splitmix64 finalizer over (seed ^ hash).
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

IdentitySpace make_space(const ExperimentConfig& cfg) {
  return IdentitySpace::make(cfg.n_identities, cfg.latent_dim, cfg.input_dim, cfg.noise_sigma,
                             sub_seed(cfg.seed, "data"));
}

PairSet make_pairs(const ExperimentConfig& cfg, const IdentitySpace& space) {
  return build_pairs(space, cfg.n_pairs, sub_seed(cfg.seed, "pairs"));
}

UnlabeledSource distill_source(const ExperimentConfig& cfg, const IdentitySpace& space) {
  return synthetic_source(space, cfg.distill.batch_size, sub_seed(cfg.seed, "distill"));
}

// ---------------------------------------------------------------- training

namespace {

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt_double(double v, int precision = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

json to_json(const VerificationReport& r) {
  json tar = json::array();
  for (const auto& t : r.tar_at_far) tar.push_back({{"far", t.far}, {"tar", t.tar}, {"threshold", t.threshold}});
  auto summary = [](const ScoreSummary& s) {
    return json{{"count", s.count}, {"mean", s.mean}, {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}};
  };
  return json{{"accuracy", r.accuracy},
              {"threshold", r.threshold},
              {"tar_at_far", tar},
              {"genuine_scores", summary(r.genuine)},
              {"imposter_scores", summary(r.imposter)}};
}

json to_json(const SizeReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"bits", e.bits},
                       {"payload_bytes", e.payload_bytes},
                       {"overhead_bytes", e.overhead_bytes},
                       {"total_bytes", e.total_bytes},
                       {"payload_ratio", e.payload_ratio},
                       {"ratio", e.ratio}});
  }
  return json{{"param_count", r.param_count}, {"fp32_bytes", r.fp32_bytes}, {"quantized", entries}};
}

json to_json(const RangeCorrelationReport& r) {
  json depths = json::array();
  for (std::size_t i = 0; i < r.iou.size(); ++i) {
    depths.push_back({{"depth", i + 1},
                      {"first", {r.first[i].lo, r.first[i].hi}},
                      {"second", {r.second[i].lo, r.second[i].hi}},
                      {"iou", r.iou[i]}});
  }
  return json{{"depths", depths}, {"mean_iou", r.mean_iou}};
}

void write_json(const fs::path& path, const json& j) { detail::write_text_atomic(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

}  // namespace

TeacherResult train_teacher(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const auto space = make_space(cfg);
  const auto arch = cfg.architecture();
  const std::uint64_t seed = sub_seed(cfg.seed, "teacher");

  TeacherResult result{EmbeddingNet::create(arch, seed), {}, {}};
  EmbeddingNet& net = result.teacher;

  // Softmax classifier over the identities, discarded after training.
  std::mt19937_64 rng(sub_seed(seed, "head"));
  std::normal_distribution<float> init(0.0f, 1.0f / std::sqrt(static_cast<float>(cfg.embedding_dim)));
  Tensor head_w({cfg.n_identities, cfg.embedding_dim});
  for (float& v : head_w.data()) v = init(rng);
  Tensor head_b({cfg.n_identities});

  Sgd opt({cfg.teacher_lr, cfg.teacher_momentum, cfg.teacher_weight_decay});
  const std::size_t n = cfg.teacher_iterations;
  for (std::size_t it = 0; it < n; ++it) {
    // step decay by 10x at 5/9 and 8/9 of the schedule
    float lr = cfg.teacher_lr;
    if (it * 9 >= n * 5) lr *= 0.1f;
    if (it * 9 >= n * 8) lr *= 0.1f;
    opt.set_lr(lr);

    const auto batch = sample_labeled(space, cfg.teacher_batch_size, sub_seed(seed, "batch-" + std::to_string(it)));
    auto pass = forward_embed(net, batch.inputs, ForwardMode::FullPrecision);
    auto& tape = pass.tape;
    const auto w = tape.parameter(head_w);
    const auto b = tape.parameter(head_b);
    const auto logits = tape.linear(pass.pre_norm, w, b);
    const auto loss = tape.softmax_cross_entropy(logits, *batch.labels);
    result.loss_curve.push_back(tape.value(loss)[0]);
    tape.backward(loss);
    opt.step(net, collect_grads(pass));
    opt.step_extra(0, head_w, tape.grad(w));
    opt.step_extra(1, head_b, tape.grad(b));
    if (log && (it + 1) % 500 == 0) {
      say(log, "teacher iter " + std::to_string(it + 1) + " loss " +
                   fmt_double(smoothed_final_loss(result.loss_curve, cfg.smoothing_window)));
    }
  }
  if (!std::all_of(net.layers.begin(), net.layers.end(),
                   [](const LinearLayer& l) { return all_finite(l.weight) && all_finite(l.bias); })) {
    throw StateError("teacher training diverged (non-finite weights)");
  }
  result.report = verify(net, make_pairs(cfg, space), cfg.far_targets, ForwardMode::FullPrecision);
  say(log, "teacher accuracy " + fmt_double(result.report.accuracy));
  return result;
}

std::vector<StudentResult> distill_students(const ExperimentConfig& cfg, const EmbeddingNet& teacher,
                                            std::span<const int> bit_widths, const Log& log) {
  cfg.validate();
  if (teacher.dims() != cfg.architecture()) {
    throw DimensionError("teacher architecture does not match the config");
  }
  const auto space = make_space(cfg);
  const auto source = distill_source(cfg, space);
  const auto pairs = make_pairs(cfg, space);

  std::vector<StudentResult> out;
  for (int bits : bit_widths) {
    DistillConfig dc = cfg.distill;
    dc.bit_width = bits;
    dc.seed = sub_seed(cfg.seed, "distill");
    dc.validate();

    StudentResult r;
    r.bits = bits;
    auto student = calibrate(make_student(teacher, bits), source, dc.calibration_batches);
    auto tuned = finetune(std::move(student), teacher, source, dc);
    r.student = std::move(tuned.student);
    r.loss_curve = std::move(tuned.loss_curve);
    r.smoothed_final_loss = r.loss_curve.empty() ? 0.0 : smoothed_final_loss(r.loss_curve, cfg.smoothing_window);
    const std::uint64_t overhead = quantization_overhead_bytes(r.student);
    const int b[] = {bits};
    r.size = size_report(r.student.weight_count(), b, overhead);
    r.report = verify(r.student, pairs, cfg.far_targets, ForwardMode::Quantized);
    say(log, "w" + std::to_string(bits) + "a" + std::to_string(bits) + " smoothed kd loss " +
                 fmt_double(r.smoothed_final_loss, 6) + " accuracy " + fmt_double(r.report.accuracy));
    out.push_back(std::move(r));
  }

  // Non-convergence: compare against the 6-bit student when present.
  double threshold = cfg.nonconvergence_loss;
  for (const auto& r : out) {
    if (r.bits == 6) threshold = cfg.nonconvergence_factor * r.smoothed_final_loss;
  }
  for (auto& r : out) {
    r.converged = !(r.smoothed_final_loss > threshold);
    if (!r.converged) {
      say(log, "warning: w" + std::to_string(r.bits) + "a" + std::to_string(r.bits) +
                   " did not converge (smoothed kd loss " + fmt_double(r.smoothed_final_loss, 6) +
                   " > " + fmt_double(threshold, 6) + ")");
    }
  }
  return out;
}

// ---------------------------------------------------------------- commands

std::vector<fs::path> cmd_pretrain(const ExperimentConfig& cfg, const Log& log) {
  ensure_dir(cfg.output_dir);
  const auto result = train_teacher(cfg, log);
  const fs::path model = cfg.output_dir / "teacher.qfmd";
  const fs::path curve = cfg.output_dir / "teacher_loss.csv";
  const fs::path report = cfg.output_dir / "teacher_report.json";
  save_model(result.teacher, model, ModelMode::FullPrecision);
  detail::write_text_atomic(curve, loss_curve_csv(result.loss_curve));
  json j{{"model", model.filename().string()},
         {"seed", cfg.seed},
         {"param_count", result.teacher.weight_count()},
         {"fp32_bytes", result.teacher.weight_count() * 4},
         {"final_loss", smoothed_final_loss(result.loss_curve, cfg.smoothing_window)},
         {"verification", to_json(result.report)}};
  write_json(report, j);
  say(log, "wrote " + model.string());
  return {model, curve, report};
}

std::vector<fs::path> cmd_distill(const ExperimentConfig& cfg, const fs::path& teacher_path,
                                  std::span<const int> bit_widths, const Log& log) {
  std::vector<int> bits(bit_widths.begin(), bit_widths.end());
  if (bits.empty()) bits = cfg.bit_widths;
  for (int b : bits) {
    if (b != 4 && b != 6 && b != 8) throw ConfigError("config field 'bits': must be 4, 6 or 8 (got " + std::to_string(b) + ")");
  }
  if (!fs::exists(teacher_path)) throw IoError("teacher model not found: " + teacher_path.string());
  auto teacher = load_model(teacher_path);
  if (natural_mode(teacher) != ModelMode::FullPrecision) throw StateError("teacher must be a full-precision model");
  ensure_dir(cfg.output_dir);

  const auto students = distill_students(cfg, teacher, bits, log);
  std::vector<fs::path> written;
  json summary = json::array();
  for (const auto& r : students) {
    const std::string tag = "w" + std::to_string(r.bits);
    const fs::path model = cfg.output_dir / ("student_" + tag + ".qfmd");
    const fs::path curve = cfg.output_dir / ("loss_" + tag + ".csv");
    const fs::path size = cfg.output_dir / ("size_" + tag + ".json");
    save_model(r.student, model, ModelMode::Quantized);
    detail::write_text_atomic(curve, loss_curve_csv(r.loss_curve));
    write_json(size, to_json(r.size));
    summary.push_back({{"bits", r.bits},
                       {"model", model.filename().string()},
                       {"smoothed_final_loss", r.smoothed_final_loss},
                       {"initial_loss", r.loss_curve.empty() ? 0.0 : window_means(r.loss_curve, cfg.smoothing_window).front()},
                       {"converged", r.converged},
                       {"verification", to_json(r.report)},
                       {"size", to_json(r.size)}});
    written.insert(written.end(), {model, curve, size});
  }
  const fs::path summary_path = cfg.output_dir / "distill_summary.json";
  write_json(summary_path, json{{"seed", cfg.seed}, {"students", summary}});
  written.push_back(summary_path);
  return written;
}

std::vector<fs::path> cmd_eval(const ExperimentConfig& cfg, std::span<const fs::path> model_paths, const Log& log) {
  if (model_paths.empty()) throw ConfigError("eval needs at least one model");
  std::vector<fs::path> unique;
  std::set<fs::path> seen;
  for (const auto& p : model_paths) {
    const auto key = fs::weakly_canonical(p);
    if (!seen.insert(key).second) {
      say(log, "warning: duplicate model path " + p.string() + " ignored");
      continue;
    }
    unique.push_back(p);
  }

  struct Loaded {
    fs::path path;
    EmbeddingNet net;
  };
  std::vector<Loaded> models;
  for (const auto& p : unique) {
    if (!fs::exists(p)) throw IoError("model not found: " + p.string());
    models.push_back({p, load_model(p)});
  }
  for (const auto& m : models) {
    if (m.net.dims() != models.front().net.dims()) {
      throw DimensionError("model " + m.path.string() + " has a different architecture than " +
                           models.front().path.string());
    }
  }
  ensure_dir(cfg.output_dir);
  const auto space = make_space(cfg);
  if (space.input_dim() != models.front().net.input_dim()) {
    throw DimensionError("models expect input dim " + std::to_string(models.front().net.input_dim()) +
                         " but the config produces " + std::to_string(space.input_dim()));
  }
  const auto pairs = make_pairs(cfg, space);

  json rows = json::array();
  for (const auto& m : models) {
    const auto mode = natural_mode(m.net);
    const auto report = verify(m.net, pairs, cfg.far_targets, forward_mode(mode));
    const bool quantized = mode == ModelMode::Quantized;
    const int bits = quantized ? m.net.bit_width() : 32;
    const int b[] = {bits};
    const auto file_bytes = fs::file_size(m.path);
    json row{{"model", m.path.filename().string()},
             {"mode", quantized ? "quantized" : "fp32"},
             {"bits", bits},
             {"param_count", m.net.weight_count()},
             {"payload_bytes", quantized ? size_report(m.net.weight_count(), b).entries.front().payload_bytes
                                         : m.net.weight_count() * 4},
             {"file_bytes", file_bytes},
             {"verification", to_json(report)}};
    rows.push_back(row);
    say(log, m.path.filename().string() + ": accuracy " + fmt_double(report.accuracy));
  }

  // Pairwise range comparison between calibrated models, plus each
  // calibrated model against a recalibration on an independent source.
  json pairwise = json::array();
  json independent = json::array();
  std::string csv = "depth,lo,hi,source\n";
  const auto alt_source = synthetic_source(space, cfg.distill.batch_size, sub_seed(cfg.seed, "calibration-independent"));
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!models[i].net.calibrated()) continue;
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      if (!models[j].net.calibrated()) continue;
      pairwise.push_back({{"first", models[i].path.filename().string()},
                          {"second", models[j].path.filename().string()},
                          {"correlation", to_json(range_correlation(models[i].net, models[j].net))}});
    }
    EmbeddingNet fresh = models[i].net;
    fresh.set_bit_width(fresh.bit_width());
    fresh = calibrate(std::move(fresh), alt_source, cfg.distill.calibration_batches);
    const auto corr = range_correlation(models[i].net, fresh);
    const auto name = models[i].path.filename().string();
    independent.push_back({{"model", name}, {"correlation", to_json(corr)}});
    auto body = range_csv(corr, name + ":stored", name + ":independent");
    csv += body.substr(body.find('\n') + 1);
  }

  json report{{"seed", cfg.seed}, {"n_pairs", cfg.n_pairs}, {"models", rows}};
  if (models.size() > 1 && !pairwise.empty()) report["range_correlation"] = pairwise;
  const bool correlate = models.size() > 1 && !independent.empty();
  if (correlate) report["independent_calibration"] = independent;
  const fs::path report_path = cfg.output_dir / "eval_report.json";
  write_json(report_path, report);
  std::vector<fs::path> written{report_path};
  if (correlate) {
    const fs::path ranges = cfg.output_dir / "ranges.csv";
    detail::write_text_atomic(ranges, csv);
    written.push_back(ranges);
  }
  return written;
}

}  // namespace quantdistill
