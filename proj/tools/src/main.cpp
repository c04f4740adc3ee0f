#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "prefopt/app/commands.hpp"

namespace {

using prefopt::app::CommandOptions;

void add_common(CLI::App& cmd, CommandOptions& o) {
  cmd.add_option("--config", o.config, "Run config (flat JSON)")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_option("--out", o.out, "Output directory");
  cmd.add_flag("--quiet", o.quiet, "Only report errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefopt: preference-optimization losses on a bigram table policy"};
  app.require_subcommand(1);
  CommandOptions o;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic preference dataset");
  add_common(*gen, o);
  gen->add_option("--dataset", o.dataset, "Output dataset path");

  auto* train = app.add_subcommand("train", "Train a policy and log win rates");
  add_common(*train, o);
  train->add_option("--dataset", o.dataset, "Dataset to train on");
  train->add_option("--variant", o.variant, "Loss variant");
  train->add_option("--noise", o.noise, "Noise injected into the training split")
      ->check(CLI::IsMember({"none", "flip", "segment"}));
  train->add_option("--gamma", o.gamma, "Flip probability for --noise flip");
  train->add_option("--eval-noise", o.eval_noise, "Noise applied to the evaluation split")
      ->check(CLI::IsMember({"none", "flip", "segment"}));
  train->add_option("--eval-gamma", o.eval_gamma, "Flip probability for --eval-noise flip");

  auto* eval = app.add_subcommand("eval", "Win rate of a checkpoint on a dataset");
  add_common(*eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Policy checkpoint")->required();
  eval->add_option("--dataset", o.dataset, "Dataset to evaluate")->required();
  eval->add_option("--variant", o.variant, "Margin variant (default: checkpoint's)");
  eval->add_option("--noise", o.noise, "Noise applied before scoring")
      ->check(CLI::IsMember({"none", "flip", "segment"}));
  eval->add_option("--gamma", o.gamma, "Flip probability for --noise flip");

  auto* verify = app.add_subcommand("verify", "Run the property suite");
  add_common(*verify, o);
  verify->add_flag("--fault-invert-robust-denominator", o.fault_invert_robust_denominator)
      ->group("");

  auto* matrix = app.add_subcommand("matrix", "Run the four-experiment matrix");
  add_common(*matrix, o);
  matrix->add_option("--dataset", o.dataset, "Dataset to split (default: generate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : prefopt::app::kExitConfig;
  }

  if (*gen) return prefopt::app::cmd_gen_data(o, std::cout, std::cerr);
  if (*train) return prefopt::app::cmd_train(o, std::cout, std::cerr);
  if (*eval) return prefopt::app::cmd_eval(o, std::cout, std::cerr);
  if (*verify) return prefopt::app::cmd_verify(o, std::cout, std::cerr);
  return prefopt::app::cmd_matrix(o, std::cout, std::cerr);
}
