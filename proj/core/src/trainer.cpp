#include "prefopt/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/eval.hpp"

namespace prefopt {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kDeltaStream = 0x64656c74ULL;
constexpr std::uint64_t kLoggedLossStream = 0x6c6f7373ULL;

}  // namespace

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (iterations < 1) throw Error(ErrorCode::kInvalidConfig, "iterations must be >= 1");
  if (eval_every < 1) throw Error(ErrorCode::kInvalidConfig, "eval_every must be >= 1");
  train_noise.validate();
  eval_noise.validate();
  if (!is_two_dimensional(loss.variant) &&
      (train_noise.kind == NoiseKind::kSegmentPerturb ||
       eval_noise.kind == NoiseKind::kSegmentPerturb)) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("segment noise needs a segment-scored variant, not ") +
                    std::string(to_string(loss.variant)));
  }
}

StepResult minibatch_step(const PolicyParams& params, const ReferencePolicy& ref,
                          std::span<const PreferencePair> batch, const TrainConfig& config,
                          Rng& rng, std::size_t iteration) {
  LossReport report = loss_and_grad(config.loss, params, ref, batch, rng);
  if (!std::isfinite(report.value) || !report.gradient.values.all_finite()) {
    throw Error(ErrorCode::kDiverged,
                "non-finite loss or gradient at iteration " + std::to_string(iteration));
  }
  PolicyParams next = params;
  next.logits.add_scaled(report.gradient.values, -config.learning_rate);
  if (!next.logits.all_finite()) {
    throw Error(ErrorCode::kDiverged,
                "non-finite parameters after iteration " + std::to_string(iteration));
  }
  return {std::move(next), std::move(report)};
}

Dataset prepare_dataset(const Dataset& dataset, LossVariant variant, const NoiseConfig& noise) {
  Dataset out = apply_noise(dataset, noise);
  if (is_two_dimensional(variant)) {
    if (!out.scored()) {
      throw Error(ErrorCode::kInvalidConfig, std::string(to_string(variant)) +
                                                 " needs segment scores on every pair");
    }
    for (PreferencePair& pair : out.pairs) pair = select_segments(pair);
  }
  return out;
}

double dataset_loss(const LossConfig& loss, const PolicyParams& params,
                    const ReferencePolicy& ref, std::span<const PreferencePair> pairs,
                    std::uint64_t delta_seed) {
  std::vector<double> deltas;
  if (loss.variant == LossVariant::kRobust2DSegment) {
    deltas.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) deltas[i] = counter_uniform(delta_seed, i);
  }
  return loss_and_grad(loss, params, ref, pairs, deltas).value;
}

TrainResult train(const Dataset& train_set, const Dataset& eval_set, const ReferencePolicy& ref,
                  const TrainConfig& config, const HistorySink& sink) {
  config.validate();
  if (train_set.pairs.empty()) throw Error(ErrorCode::kInvalidInput, "training set is empty");
  if (eval_set.pairs.empty()) throw Error(ErrorCode::kInvalidInput, "evaluation set is empty");
  if (train_set.vocab_size != ref.vocab_size() || eval_set.vocab_size != ref.vocab_size()) {
    throw Error(ErrorCode::kInvalidConfig, "dataset and reference vocabularies differ");
  }

  const LossVariant variant = config.loss.variant;
  const Dataset train_split = prepare_dataset(train_set, variant, config.train_noise);
  const Dataset eval_split = prepare_dataset(eval_set, variant, config.eval_noise);
  const std::span<const PreferencePair> train_pairs = train_split.pairs;

  TrainResult result{ref.as_params(), {}};
  PolicyParams& params = result.final_params;

  auto log_step = [&](std::size_t iteration) {
    HistoryEntry entry;
    entry.iteration = iteration;
    entry.train_loss = dataset_loss(config.loss, params, ref, train_pairs,
                                    derive_seed(config.seed ^ kLoggedLossStream, iteration));
    entry.train_win_rate = win_rate(params, ref, train_pairs, variant, config.loss.beta).win_rate;
    entry.eval_win_rate =
        win_rate(params, ref, eval_split.pairs, variant, config.loss.beta).win_rate;
    if (!std::isfinite(entry.train_loss)) {
      throw Error(ErrorCode::kDiverged,
                  "non-finite training loss at iteration " + std::to_string(iteration));
    }
    result.history.push_back(entry);
    if (sink) sink(entry);
  };

  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng delta_rng(derive_seed(config.seed, kDeltaStream));
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<PreferencePair> batch;
  batch.reserve(config.batch_size);

  log_step(0);
  for (std::size_t iteration = 1; iteration <= config.iterations; ++iteration) {
    if (cursor >= order.size()) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + config.batch_size);
    batch.clear();
    for (std::size_t i = cursor; i < end; ++i) batch.push_back(train_pairs[order[i]]);
    cursor = end;

    params = minibatch_step(params, ref, batch, config, delta_rng, iteration).params;
    if (iteration % config.eval_every == 0 || iteration == config.iterations) log_step(iteration);
  }
  return result;
}

std::string history_to_json(const HistoryEntry& entry) {
  const nlohmann::ordered_json line = {{"iter", entry.iteration},
                                       {"loss", entry.train_loss},
                                       {"train_win_rate", entry.train_win_rate},
                                       {"eval_win_rate", entry.eval_win_rate}};
  return line.dump();
}

Gradient finite_diff_gradient(const std::function<double(const PolicyParams&)>& loss,
                              const PolicyParams& params, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidConfig, "finite-difference step must be > 0");
  Gradient grad(params.vocab_size());
  PolicyParams probe = params;
  auto probe_values = probe.logits.values();
  auto out = grad.values.values();
  for (std::size_t i = 0; i < probe_values.size(); ++i) {
    const double original = probe_values[i];
    probe_values[i] = original + h;
    const double up = loss(probe);
    probe_values[i] = original - h;
    const double down = loss(probe);
    probe_values[i] = original;
    out[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace prefopt
