#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "prefopt/corpus.hpp"

namespace prefopt {

enum class NoiseKind { kNone, kPreferenceFlip, kSegmentPerturb };

std::string_view to_string(NoiseKind kind);
/// Accepts "none", "flip", "segment".
NoiseKind parse_noise_kind(std::string_view name);

struct NoiseConfig {
  NoiseKind kind = NoiseKind::kNone;
  /// Flip probability for kPreferenceFlip; must stay below 1/2.
  double gamma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-pair flip decisions: pair i flips iff u(seed, i) < gamma.
std::vector<bool> flip_mask(std::size_t num_pairs, double gamma, std::uint64_t seed);

/// Swaps winner and loser of every masked pair. Applying the same mask twice
/// restores the input.
Dataset apply_flip_mask(const Dataset& dataset, const std::vector<bool>& mask);

Dataset flip_preferences(const Dataset& dataset, double gamma, std::uint64_t seed);

/// Winner scores minus delta, loser scores plus delta; no clamping.
PreferencePair perturb_scores(const PreferencePair& pair, double delta);

/// delta_i ~ U[0, 1) for pair i, a pure function of (seed, i).
std::vector<double> draw_deltas(std::size_t num_pairs, std::uint64_t seed);

Dataset perturb_dataset(const Dataset& dataset, std::uint64_t seed);

Dataset apply_noise(const Dataset& dataset, const NoiseConfig& config);

}  // namespace prefopt
