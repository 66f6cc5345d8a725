#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quantdistill/graph.hpp"
#include "quantdistill/synth_data.hpp"

namespace quantdistill {

/// Verification pairs: row i of `left` and `right` form one pair.
struct PairSet {
  Tensor left;
  Tensor right;
  std::vector<bool> genuine;

  std::size_t size() const noexcept { return genuine.size(); }
};

/// n_pairs / 2 genuine pairs (same identity, independent noise) followed by
/// n_pairs / 2 imposter pairs (two different identities).
PairSet build_pairs(const IdentitySpace& space, std::size_t n_pairs, std::uint64_t seed);

struct ScoreSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct TarAtFar {
  double far = 0.0;
  double tar = 0.0;
  double threshold = 0.0;
};

struct VerificationReport {
  double accuracy = 0.0;  // at the best threshold of the sweep
  double threshold = 0.0;
  std::vector<TarAtFar> tar_at_far;
  ScoreSummary genuine;
  ScoreSummary imposter;
};

struct BestThreshold {
  double accuracy = 0.0;
  double threshold = 0.0;
};

/// Accepts score > threshold. Sweeps every midpoint between adjacent distinct
/// sorted scores plus one threshold below and one above all scores.
BestThreshold best_threshold(std::span<const double> genuine, std::span<const double> imposter);

/// Threshold = the (floor(far * n) + 1)-th highest imposter score, so at most
/// far * n imposters score strictly above it.
TarAtFar tar_at_far(std::span<const double> genuine, std::span<const double> imposter, double far);

VerificationReport verify_scores(std::span<const double> genuine, std::span<const double> imposter,
                                 std::span<const double> far_targets);

/// Cosine similarity of each pair's embeddings.
std::vector<double> pair_scores(const EmbeddingNet& net, const PairSet& pairs, ForwardMode mode);

VerificationReport verify(const EmbeddingNet& net, const PairSet& pairs, std::span<const double> far_targets,
                          ForwardMode mode);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// |overlap| / |union|. Two identical points give 1, disjoint intervals 0.
double interval_iou(Interval a, Interval b);

struct RangeCorrelationReport {
  std::vector<Interval> first;
  std::vector<Interval> second;
  std::vector<double> iou;  // per activation depth
  double mean_iou = 0.0;
};

/// Compares the frozen activation ranges of two calibrated nets of the same
/// architecture, depth by depth.
RangeCorrelationReport range_correlation(const EmbeddingNet& a, const EmbeddingNet& b);

/// `depth,lo,hi,source` rows (depth counted from 1) for both sides.
std::string range_csv(const RangeCorrelationReport& report, const std::string& first_source,
                      const std::string& second_source);

}  // namespace quantdistill
