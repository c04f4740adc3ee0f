#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/noise.hpp"
#include "prefopt/policy.hpp"

namespace prefopt {

struct TrainConfig {
  LossConfig loss;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t iterations = 1000;
  /// Iterations between logged evaluations; iteration 0 and the last
  /// iteration are always logged.
  std::size_t eval_every = 100;
  std::uint64_t seed = 1;
  NoiseConfig train_noise;
  NoiseConfig eval_noise;

  void validate() const;
};

struct HistoryEntry {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  double train_win_rate = 0.0;
  double eval_win_rate = 0.0;

  bool operator==(const HistoryEntry&) const = default;
};

struct TrainResult {
  PolicyParams final_params;
  std::vector<HistoryEntry> history;
};

struct StepResult {
  PolicyParams params;
  LossReport report;
};

/// One SGD step: theta <- theta - lr * mean per-pair gradient. For
/// robust_2d_segment a delta ~ U[0,1) is drawn per pair from `rng`.
/// Throws kDiverged (naming `iteration`) on a non-finite loss or gradient.
StepResult minibatch_step(const PolicyParams& params, const ReferencePolicy& ref,
                          std::span<const PreferencePair> batch, const TrainConfig& config,
                          Rng& rng, std::size_t iteration = 0);

/// Applies train/eval noise, then top-N/bottom-N selection for segment
/// variants.
Dataset prepare_dataset(const Dataset& dataset, LossVariant variant, const NoiseConfig& noise);

/// Mean loss of the configured variant over a whole split. Segment-noise
/// deltas come from the counter stream (seed, pair index).
double dataset_loss(const LossConfig& loss, const PolicyParams& params,
                    const ReferencePolicy& ref, std::span<const PreferencePair> pairs,
                    std::uint64_t delta_seed);

using HistorySink = std::function<void(const HistoryEntry&)>;

/// Minibatch SGD from theta_0 = reference logits. Batches are consecutive
/// slices of a seeded shuffle, reshuffled every epoch; the last partial batch
/// of an epoch is kept. Deterministic under config.seed.
TrainResult train(const Dataset& train_set, const Dataset& eval_set, const ReferencePolicy& ref,
                  const TrainConfig& config, const HistorySink& sink = {});

/// One metrics line: {"iter":..,"loss":..,"train_win_rate":..,"eval_win_rate":..}
std::string history_to_json(const HistoryEntry& entry);

/// Central differences (L(theta + h e) - L(theta - h e)) / 2h per coordinate.
Gradient finite_diff_gradient(const std::function<double(const PolicyParams&)>& loss,
                              const PolicyParams& params, double h = 1e-5);

}  // namespace prefopt
