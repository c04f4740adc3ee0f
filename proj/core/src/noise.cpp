#include "prefopt/noise.hpp"

#include <string>

#include "prefopt/errors.hpp"
#include "prefopt/numerics.hpp"

namespace prefopt {

namespace {

// Separate counter streams so flip and perturbation draws under the same seed
// are unrelated.
constexpr std::uint64_t kFlipStream = 0x666c6970ULL;
constexpr std::uint64_t kDeltaStream = 0x64656c7461ULL;

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw Error(ErrorCode::kInvalidNoise,
                "flip probability must lie in [0, 0.5), got " + std::to_string(gamma));
  }
}

void shift_scores(SegmentedResponse& response, double shift) {
  for (Segment& seg : response.segments) {
    if (!seg.score) throw Error(ErrorCode::kMissingScores, "cannot perturb unscored segments");
    *seg.score += shift;
  }
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kPreferenceFlip: return "flip";
    case NoiseKind::kSegmentPerturb: return "segment";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::kNone;
  if (name == "flip") return NoiseKind::kPreferenceFlip;
  if (name == "segment") return NoiseKind::kSegmentPerturb;
  throw Error(ErrorCode::kInvalidConfig, "unknown noise kind \"" + std::string(name) + "\"");
}

void NoiseConfig::validate() const { check_gamma(gamma); }

std::vector<bool> flip_mask(std::size_t num_pairs, double gamma, std::uint64_t seed) {
  check_gamma(gamma);
  const std::uint64_t stream = derive_seed(seed, kFlipStream);
  std::vector<bool> mask(num_pairs);
  for (std::size_t i = 0; i < num_pairs; ++i) mask[i] = counter_uniform(stream, i) < gamma;
  return mask;
}

Dataset apply_flip_mask(const Dataset& dataset, const std::vector<bool>& mask) {
  if (mask.size() != dataset.pairs.size()) {
    throw Error(ErrorCode::kInvalidInput, "flip mask length does not match the dataset");
  }
  Dataset out = dataset;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) std::swap(out.pairs[i].winner, out.pairs[i].loser);
  }
  return out;
}

Dataset flip_preferences(const Dataset& dataset, double gamma, std::uint64_t seed) {
  return apply_flip_mask(dataset, flip_mask(dataset.pairs.size(), gamma, seed));
}

PreferencePair perturb_scores(const PreferencePair& pair, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::kInvalidNoise, "delta must lie in [0, 1], got " + std::to_string(delta));
  }
  PreferencePair out = pair;
  shift_scores(out.winner, -delta);
  shift_scores(out.loser, delta);
  return out;
}

std::vector<double> draw_deltas(std::size_t num_pairs, std::uint64_t seed) {
  const std::uint64_t stream = derive_seed(seed, kDeltaStream);
  std::vector<double> deltas(num_pairs);
  for (std::size_t i = 0; i < num_pairs; ++i) deltas[i] = counter_uniform(stream, i);
  return deltas;
}

Dataset perturb_dataset(const Dataset& dataset, std::uint64_t seed) {
  if (!dataset.scored()) {
    throw Error(ErrorCode::kMissingScores, "segment perturbation needs a scored dataset");
  }
  const std::vector<double> deltas = draw_deltas(dataset.pairs.size(), seed);
  Dataset out = dataset;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    out.pairs[i] = perturb_scores(dataset.pairs[i], deltas[i]);
  }
  return out;
}

Dataset apply_noise(const Dataset& dataset, const NoiseConfig& config) {
  config.validate();
  switch (config.kind) {
    case NoiseKind::kNone: return dataset;
    case NoiseKind::kPreferenceFlip: return flip_preferences(dataset, config.gamma, config.seed);
    case NoiseKind::kSegmentPerturb: return perturb_dataset(dataset, config.seed);
  }
  return dataset;
}

}  // namespace prefopt
