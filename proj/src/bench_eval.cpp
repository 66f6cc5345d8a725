#include "quantdistill/bench_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "quantdistill/distiller.hpp"
#include "quantdistill/errors.hpp"

namespace quantdistill {

PairSet build_pairs(const IdentitySpace& space, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs < 2 || n_pairs % 2 != 0) throw DomainError("n_pairs must be even and >= 2");
  if (space.n_identities() < 2) throw DomainError("pairs need at least 2 identities");
  std::mt19937_64 rng(seed);
  const auto n_ids = static_cast<std::uint32_t>(space.n_identities());
  std::uniform_int_distribution<std::uint32_t> pick(0, n_ids - 1);
  std::uniform_int_distribution<std::uint32_t> other(1, n_ids - 1);

  std::vector<std::uint32_t> left(n_pairs), right(n_pairs);
  PairSet pairs;
  pairs.genuine.assign(n_pairs, false);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    left[i] = pick(rng);
    if (i < n_pairs / 2) {
      right[i] = left[i];
      pairs.genuine[i] = true;
    } else {
      right[i] = (left[i] + other(rng)) % n_ids;
    }
  }
  // Independent noise streams for the two sides.
  pairs.left = space.map(latents_for(space, left, seed * 2 + 1));
  pairs.right = space.map(latents_for(space, right, seed * 2 + 2));
  return pairs;
}

namespace {

ScoreSummary summarize(std::span<const double> s) {
  ScoreSummary out;
  out.count = s.size();
  if (s.empty()) return out;
  double sum = 0.0;
  for (double v : s) sum += v;
  out.mean = sum / static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(s.size()));
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  out.min = *lo;
  out.max = *hi;
  return out;
}

}  // namespace

BestThreshold best_threshold(std::span<const double> genuine, std::span<const double> imposter) {
  if (genuine.empty() && imposter.empty()) throw DomainError("no scores to threshold");
  std::vector<std::pair<double, bool>> all;
  all.reserve(genuine.size() + imposter.size());
  for (double s : genuine) all.emplace_back(s, true);
  for (double s : imposter) all.emplace_back(s, false);
  std::sort(all.begin(), all.end());

  // Threshold below everything: every genuine accepted, every imposter wrong.
  std::size_t correct = genuine.size();
  BestThreshold best{static_cast<double>(correct), all.front().first - 1.0};
  for (std::size_t i = 0; i < all.size();) {
    // move the threshold past the whole run of equal scores
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      // genuine above the threshold becomes rejected, imposter becomes correct
      if (all[j].second) --correct; else ++correct;
      ++j;
    }
    const double t = j < all.size() ? 0.5 * (all[i].first + all[j].first) : all[i].first + 1.0;
    if (static_cast<double>(correct) > best.accuracy) best = {static_cast<double>(correct), t};
    i = j;
  }
  best.accuracy /= static_cast<double>(all.size());
  return best;
}

TarAtFar tar_at_far(std::span<const double> genuine, std::span<const double> imposter, double far) {
  if (genuine.empty() || imposter.empty()) throw DomainError("TAR@FAR needs genuine and imposter scores");
  if (!(far >= 0.0 && far <= 1.0)) throw DomainError("FAR target must be in [0, 1]");
  std::vector<double> imp(imposter.begin(), imposter.end());
  std::sort(imp.begin(), imp.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor(far * static_cast<double>(imp.size()) + 1e-9));
  const double threshold = allowed < imp.size() ? imp[allowed] : -std::numeric_limits<double>::infinity();
  const auto accepted = std::count_if(genuine.begin(), genuine.end(), [&](double s) { return s > threshold; });
  return {far, static_cast<double>(accepted) / static_cast<double>(genuine.size()), threshold};
}

VerificationReport verify_scores(std::span<const double> genuine, std::span<const double> imposter,
                                 std::span<const double> far_targets) {
  if (genuine.empty() || imposter.empty()) throw DomainError("verification needs genuine and imposter pairs");
  VerificationReport r;
  const auto best = best_threshold(genuine, imposter);
  r.accuracy = best.accuracy;
  r.threshold = best.threshold;
  for (double far : far_targets) r.tar_at_far.push_back(tar_at_far(genuine, imposter, far));
  r.genuine = summarize(genuine);
  r.imposter = summarize(imposter);
  return r;
}

std::vector<double> pair_scores(const EmbeddingNet& net, const PairSet& pairs, ForwardMode mode) {
  if (pairs.size() == 0) throw DomainError("empty pair set");
  const Tensor a = embed(net, pairs.left, mode);
  const Tensor b = embed(net, pairs.right, mode);
  std::vector<double> scores(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) scores[i] = cosine_similarity(a.row(i), b.row(i));
  return scores;
}

VerificationReport verify(const EmbeddingNet& net, const PairSet& pairs, std::span<const double> far_targets,
                          ForwardMode mode) {
  const auto scores = pair_scores(net, pairs, mode);
  std::vector<double> genuine, imposter;
  for (std::size_t i = 0; i < scores.size(); ++i) (pairs.genuine[i] ? genuine : imposter).push_back(scores[i]);
  return verify_scores(genuine, imposter, far_targets);
}

double interval_iou(Interval a, Interval b) {
  const double inter = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
  const double uni = std::max(a.hi, b.hi) - std::min(a.lo, b.lo);
  if (uni <= 0.0) return a.lo == b.lo ? 1.0 : 0.0;
  return inter / uni;
}

RangeCorrelationReport range_correlation(const EmbeddingNet& a, const EmbeddingNet& b) {
  if (a.dims() != b.dims()) throw DimensionError("range_correlation: architectures differ");
  if (!a.calibrated() || !b.calibrated()) throw StateError("range_correlation needs calibrated nets");
  RangeCorrelationReport r;
  const auto pa = a.activation_params();
  const auto pb = b.activation_params();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    r.first.push_back({pa[i].range_lo, pa[i].range_hi});
    r.second.push_back({pb[i].range_lo, pb[i].range_hi});
    r.iou.push_back(interval_iou(r.first.back(), r.second.back()));
    sum += r.iou.back();
  }
  r.mean_iou = r.iou.empty() ? 0.0 : sum / static_cast<double>(r.iou.size());
  return r;
}

std::string range_csv(const RangeCorrelationReport& report, const std::string& first_source,
                      const std::string& second_source) {
  std::ostringstream os;
  os.precision(9);
  os << "depth,lo,hi,source\n";
  for (std::size_t i = 0; i < report.first.size(); ++i) {
    os << i + 1 << ',' << report.first[i].lo << ',' << report.first[i].hi << ',' << first_source << '\n';
  }
  for (std::size_t i = 0; i < report.second.size(); ++i) {
    os << i + 1 << ',' << report.second[i].lo << ',' << report.second[i].hi << ',' << second_source << '\n';
  }
  return os.str();
}

}  // namespace quantdistill
