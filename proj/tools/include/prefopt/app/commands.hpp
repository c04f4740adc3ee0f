#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prefopt/app/run_config.hpp"
#include "prefopt/corpus.hpp"

namespace prefopt::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitPropertyFailure = 1,
  kExitConfig = 2,
  kExitDiverged = 3,
};

/// Command-line overrides shared by every subcommand. Unset fields fall
/// back to the config file, then to RunConfig defaults.
struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::string> variant;
  std::optional<std::string> noise;
  std::optional<double> gamma;
  std::optional<std::string> eval_noise;
  std::optional<double> eval_gamma;
  bool quiet = false;
  bool fault_invert_robust_denominator = false;
};

/// Config file plus command-line overrides, validated.
RunConfig resolve_config(const CommandOptions& options);

struct Splits {
  Dataset train;
  Dataset eval;
};

/// Loads or generates the dataset of a run and splits it. A separate
/// eval_dataset wins over eval_fraction.
Splits load_splits(const RunConfig& config);

struct MatrixRow {
  std::string algorithm;
  double train_win_rate = 0.0;
  double eval_win_rate = 0.0;
};

/// The four-row experiment matrix on one dataset with shared seeds:
/// DPO clean/clean, 2D-DPO clean/clean, 2D-DPO clean/noisy and robust
/// 2D-DPO clean/noisy. `on_row` sees each row as soon as it finishes.
std::vector<MatrixRow> run_matrix(const RunConfig& config, const Splits& splits,
                                  const std::function<void(const MatrixRow&)>& on_row = {});

inline constexpr const char* kMatrixHeader = "algorithm,train_win_rate,eval_win_rate";
std::string matrix_csv_line(const MatrixRow& row);

int cmd_gen_data(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_matrix(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace prefopt::app
