#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "prefopt/corpus.hpp"
#include "prefopt/policy.hpp"
#include "prefopt/synthetic.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt::app {

/// One experiment run. Parsed from a single flat JSON object; every key is
/// optional and unknown keys are rejected. See README for the key list.
struct RunConfig {
  std::string label = "run";
  std::filesystem::path out_dir = "prefopt-out";
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> eval_dataset;
  /// Share of `dataset` held out for evaluation when no eval_dataset is given.
  double eval_fraction = 0.2;
  AspectWeights aspect_weights;

  /// Master seed. Generator, trainer, split and noise seeds default to
  /// streams derived from it.
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> generator_seed;
  std::optional<std::uint64_t> train_noise_seed;
  std::optional<std::uint64_t> eval_noise_seed;

  GeneratorConfig generator;
  TrainConfig train;

  ReferenceInit reference_init = ReferenceInit::kUniform;
  std::optional<std::uint64_t> reference_seed;
  double reference_scale = 1.0;

  GeneratorConfig generator_config() const;
  TrainConfig train_config() const;
  ReferenceSpec reference_spec() const;
  std::size_t vocab_size() const { return generator.vocab_size; }

  /// Throws kInvalidConfig / kInvalidWeights / kInvalidNoise.
  void validate() const;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Resolved configuration (derived seeds filled in) as pretty JSON.
std::string run_config_to_json(const RunConfig& config);

std::uint64_t default_eval_noise_seed(std::uint64_t seed);
std::uint64_t default_train_noise_seed(std::uint64_t seed);

}  // namespace prefopt::app
