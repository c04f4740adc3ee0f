#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "prefopt/corpus.hpp"
#include "prefopt/policy.hpp"

namespace prefopt {

struct GeneratorConfig {
  std::size_t vocab_size = kDefaultVocabSize;
  std::size_t num_pairs = 1000;
  std::size_t prompt_length = 4;
  std::size_t response_min_length = 8;
  std::size_t response_max_length = 24;
  double separator_probability = 0.2;
  /// Controls how far apart the planted "good" and "bad" sources are.
  double quality_gap = 2.0;
  /// Logit shift per unit of quality_gap along the quality direction.
  double quality_scale = 0.45;
  /// Slope of the planted scorer: score = 4 * sigmoid(score_sharpness * mean quality).
  double score_sharpness = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground truth behind a synthetic dataset. Winners are sampled from
/// `good`, losers from `bad`; both share a random base table and differ by
/// +/- quality_gap/2 along a random quality direction. Segment scores come
/// from that same direction, so the scorer and the sources agree.
class PlantedWorld {
 public:
  explicit PlantedWorld(const GeneratorConfig& config);

  const PolicyParams& good() const { return good_; }
  const PolicyParams& bad() const { return bad_; }
  const Matrix& quality() const { return quality_; }
  std::size_t vocab_size() const { return good_.vocab_size(); }

  /// Score in (0, 4) of one segment from its mean transition quality.
  double score_segment(Token context, std::span<const Token> response,
                       const Segment& segment) const;

  /// Mean segment score of a response under the planted scorer.
  double score_response(Token context, const SegmentedResponse& response) const;

  bool prefers_winner(const PreferencePair& pair) const;

 private:
  PolicyParams good_;
  PolicyParams bad_;
  Matrix quality_;
  double sharpness_;
};

/// Deterministic under config.seed.
Dataset generate_synthetic(const GeneratorConfig& config);

/// Fraction of pairs whose winner the planted scorer prefers.
double planted_oracle_win_rate(const PlantedWorld& world, const Dataset& dataset);

}  // namespace prefopt
