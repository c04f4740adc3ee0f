#include "prefopt/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "prefopt/errors.hpp"
#include "prefopt/eval.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/noise.hpp"
#include "prefopt/numerics.hpp"
#include "prefopt/synthetic.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt::app {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kIo, std::string(what) + " not found: " + path.string());
  }
}

std::string fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

// Runs a command body and maps failures onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kDiverged ? kExitDiverged : kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

// Clears the fault hook on every exit path.
struct FaultScope {
  explicit FaultScope(bool enabled) { fault::set_invert_robust_denominator(enabled); }
  ~FaultScope() { fault::set_invert_robust_denominator(false); }
  FaultScope(const FaultScope&) = delete;
  FaultScope& operator=(const FaultScope&) = delete;
};

Dataset subset(const Dataset& source, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.vocab_size = source.vocab_size;
  out.provenance = source.provenance;
  out.pairs.reserve(indices.size());
  for (std::size_t i : indices) out.pairs.push_back(source.pairs[i]);
  return out;
}

struct ScoreSummary {
  double winner = 0.0;
  double loser = 0.0;
};

ScoreSummary mean_scores(const Dataset& dataset) {
  double w = 0.0, l = 0.0;
  std::size_t nw = 0, nl = 0;
  for (const PreferencePair& pair : dataset.pairs) {
    for (const Segment& s : pair.winner.segments) {
      w += s.score.value_or(0.0);
      ++nw;
    }
    for (const Segment& s : pair.loser.segments) {
      l += s.score.value_or(0.0);
      ++nl;
    }
  }
  return {nw ? w / static_cast<double>(nw) : 0.0, nl ? l / static_cast<double>(nl) : 0.0};
}

}  // namespace

RunConfig resolve_config(const CommandOptions& options) {
  RunConfig config = options.config ? load_run_config(*options.config) : RunConfig{};
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.out_dir = *options.out;
  if (options.dataset) config.dataset = *options.dataset;
  if (options.variant) config.train.loss.variant = parse_variant(*options.variant);
  if (options.noise) config.train.train_noise.kind = parse_noise_kind(*options.noise);
  if (options.gamma) config.train.train_noise.gamma = *options.gamma;
  if (options.eval_noise) config.train.eval_noise.kind = parse_noise_kind(*options.eval_noise);
  if (options.eval_gamma) config.train.eval_noise.gamma = *options.eval_gamma;
  config.validate();
  return config;
}

Splits load_splits(const RunConfig& config) {
  const std::size_t vocab = config.vocab_size();
  Dataset full;
  if (config.dataset) {
    require_file(*config.dataset, "dataset");
    full = load_dataset(*config.dataset, vocab, config.aspect_weights);
  } else {
    full = generate_synthetic(config.generator_config());
  }
  if (config.eval_dataset) {
    require_file(*config.eval_dataset, "eval dataset");
    return {std::move(full), load_dataset(*config.eval_dataset, vocab, config.aspect_weights)};
  }

  const std::size_t n = full.pairs.size();
  const auto n_eval = static_cast<std::size_t>(
      std::max(1.0, std::round(config.eval_fraction * static_cast<double>(n))));
  if (n < 2 || n_eval >= n) {
    throw Error(ErrorCode::kInvalidConfig, "dataset of " + std::to_string(n) +
                                               " pairs is too small to split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, kSplitStream));
  rng.shuffle(order);
  std::vector<std::size_t> eval_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_eval), order.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {subset(full, train_idx), subset(full, eval_idx)};
}

std::string matrix_csv_line(const MatrixRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f", row.algorithm.c_str(), row.train_win_rate,
                row.eval_win_rate);
  return buf;
}

std::vector<MatrixRow> run_matrix(const RunConfig& config, const Splits& splits,
                                  const std::function<void(const MatrixRow&)>& on_row) {
  struct Experiment {
    const char* name;
    LossVariant variant;
    NoiseKind eval_noise;
  };
  static constexpr Experiment kExperiments[] = {
      {"Vanilla DPO", LossVariant::kDpo, NoiseKind::kNone},
      {"Vanilla 2D-DPO", LossVariant::kDpo2D, NoiseKind::kNone},
      {"Vanilla 2D-DPO under noise", LossVariant::kDpo2D, NoiseKind::kSegmentPerturb},
      {"Robust 2D-DPO under noise", LossVariant::kRobust2DSegment, NoiseKind::kSegmentPerturb},
  };

  const ReferencePolicy ref = config.reference_spec().build(config.vocab_size());
  std::vector<MatrixRow> rows;
  for (const Experiment& e : kExperiments) {
    TrainConfig train = config.train_config();
    train.loss.variant = e.variant;
    train.train_noise.kind = NoiseKind::kNone;
    train.eval_noise.kind = e.eval_noise;
    train.eval_noise.gamma = 0.0;
    const TrainResult result = prefopt::train(splits.train, splits.eval, ref, train);
    const HistoryEntry& last = result.history.back();
    rows.push_back({e.name, last.train_win_rate, last.eval_win_rate});
    if (on_row) on_row(rows.back());
  }
  return rows;
}

int cmd_gen_data(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    const GeneratorConfig generator = config.generator_config();
    const Dataset dataset = generate_synthetic(generator);
    const std::filesystem::path path = config.dataset.value_or(config.out_dir / "dataset.jsonl");
    {
      std::ofstream file = open_output(path);
      write_dataset(dataset, file);
      if (!file) throw Error(ErrorCode::kIo, "failed writing " + path.string());
    }
    if (!options.quiet) {
      const ScoreSummary s = mean_scores(dataset);
      const PlantedWorld world(generator);
      out << "wrote " << dataset.pairs.size() << " pairs to " << path.string() << "\n"
          << "mean winner segment score " << fixed(s.winner) << "\n"
          << "mean loser segment score  " << fixed(s.loser) << "\n"
          << "planted oracle win rate   " << fixed(planted_oracle_win_rate(world, dataset)) << "\n";
    }
    return kExitOk;
  });
}

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    const TrainConfig train = config.train_config();
    const Splits splits = load_splits(config);
    const ReferenceSpec ref_spec = config.reference_spec();
    const ReferencePolicy ref = ref_spec.build(config.vocab_size());

    std::filesystem::create_directories(config.out_dir);
    {
      std::ofstream file = open_output(config.out_dir / "eval_split.jsonl");
      write_dataset(splits.eval, file);
    }
    {
      std::ofstream file = open_output(config.out_dir / "config.json");
      file << run_config_to_json(config) << "\n";
    }
    std::ofstream metrics = open_output(config.out_dir / "metrics.jsonl");
    auto sink = [&](const HistoryEntry& entry) {
      metrics << history_to_json(entry) << "\n" << std::flush;
      if (!options.quiet) {
        out << "iter " << entry.iteration << "  loss " << fixed(entry.train_loss, 6) << "  train "
            << fixed(entry.train_win_rate) << "  eval " << fixed(entry.eval_win_rate) << "\n";
      }
    };
    const TrainResult result = prefopt::train(splits.train, splits.eval, ref, train, sink);

    Checkpoint checkpoint;
    checkpoint.header.vocab_size = config.vocab_size();
    checkpoint.header.seed = config.seed;
    checkpoint.header.beta = train.loss.beta;
    checkpoint.header.variant = std::string(to_string(train.loss.variant));
    checkpoint.header.reference = ref_spec;
    checkpoint.params = result.final_params;
    save_checkpoint(checkpoint, config.out_dir / "checkpoint.json");
    if (!options.quiet) out << "checkpoint written to " << (config.out_dir / "checkpoint.json").string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!options.checkpoint) throw Error(ErrorCode::kInvalidConfig, "eval needs --checkpoint");
    if (!options.dataset) throw Error(ErrorCode::kInvalidConfig, "eval needs --dataset");
    require_file(*options.checkpoint, "checkpoint");
    require_file(*options.dataset, "dataset");
    const Checkpoint checkpoint = load_checkpoint(*options.checkpoint);
    const CheckpointHeader& header = checkpoint.header;

    AspectWeights weights;
    if (options.config) {
      const RunConfig config = load_run_config(*options.config);
      config.aspect_weights.validate();
      if (config.vocab_size() != header.vocab_size) {
        throw Error(ErrorCode::kInvalidConfig,
                    "checkpoint vocabulary " + std::to_string(header.vocab_size) +
                        " does not match config vocabulary " + std::to_string(config.vocab_size()));
      }
      weights = config.aspect_weights;
    }
    const LossVariant variant = parse_variant(options.variant.value_or(header.variant));
    NoiseConfig noise;
    noise.kind = parse_noise_kind(options.noise.value_or("none"));
    noise.gamma = options.gamma.value_or(0.0);
    noise.seed = default_eval_noise_seed(options.seed.value_or(header.seed));
    noise.validate();
    if (noise.kind == NoiseKind::kSegmentPerturb && !is_two_dimensional(variant)) {
      throw Error(ErrorCode::kInvalidConfig, std::string("segment noise needs a segment-scored variant, not ") +
                                                 std::string(to_string(variant)));
    }

    const Dataset dataset = load_dataset(*options.dataset, header.vocab_size, weights);
    const Dataset prepared = prepare_dataset(dataset, variant, noise);
    const ReferencePolicy ref = header.reference.build(header.vocab_size);
    const EvalReport report = win_rate(checkpoint.params, ref, prepared.pairs, variant, header.beta);
    const std::string json = report.to_json();
    if (options.out) {
      std::ofstream file = open_output(*options.out / "eval.json");
      file << json << "\n";
    }
    if (!options.quiet) out << json << "\n";
    return kExitOk;
  });
}

int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const FaultScope fault(options.fault_invert_robust_denominator);
    const std::uint64_t seed = options.seed.value_or(1);
    const PropertyReport report = run_property_suite(seed);
    if (options.out) {
      std::ofstream file = open_output(*options.out / "verify.json");
      file << report.to_json() << "\n";
    }
    if (!options.quiet) out << report.to_text();
    return report.all_passed() ? kExitOk : kExitPropertyFailure;
  });
}

int cmd_matrix(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = resolve_config(options);
    const Splits splits = load_splits(config);
    std::ofstream csv = open_output(config.out_dir / "matrix.csv");
    csv << kMatrixHeader << "\n" << std::flush;
    if (!options.quiet) out << kMatrixHeader << "\n";
    run_matrix(config, splits, [&](const MatrixRow& row) {
      const std::string line = matrix_csv_line(row);
      csv << line << "\n" << std::flush;
      if (!options.quiet) out << line << "\n" << std::flush;
    });
    return kExitOk;
  });
}

}  // namespace prefopt::app
