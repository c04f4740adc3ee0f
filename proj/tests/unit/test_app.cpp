#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "prefopt/app/commands.hpp"
#include "prefopt/app/run_config.hpp"
#include "prefopt/errors.hpp"

using namespace prefopt;
using namespace prefopt::app;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("prefopt-test-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PREFOPT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

const char* kSmallConfig = R"({
  "num_pairs": 300, "vocab_size": 16, "iterations": 60, "eval_every": 20,
  "batch_size": 16, "learning_rate": 0.3, "variant": "dpo_2d", "beta": 0.5
})";

}  // namespace

TEST_SUITE("app") {

TEST_CASE("run config parsing") {
  SUBCASE("defaults") {
    const RunConfig c = parse_run_config("{}");
    CHECK(c.seed == 1);
    CHECK(c.train.loss.variant == LossVariant::kDpo);
    CHECK(c.vocab_size() == kDefaultVocabSize);
  }
  SUBCASE("flat keys land in the right place") {
    const RunConfig c = parse_run_config(R"({
      "seed": 9, "vocab_size": 12, "num_pairs": 40, "quality_gap": 3.0,
      "variant": "robust_2d_flip", "beta": 0.25, "gamma": 0.1, "learning_rate": 0.2,
      "train_noise": "flip", "train_noise_gamma": 0.2, "eval_noise": "segment",
      "aspect_weights": [0.1, 0.2, 0.3, 0.2, 0.2], "reference_init": "random"
    })");
    CHECK(c.seed == 9);
    CHECK(c.generator.vocab_size == 12);
    CHECK(c.generator.num_pairs == 40);
    CHECK(c.generator.quality_gap == 3.0);
    CHECK(c.train.loss.variant == LossVariant::kRobust2DFlip);
    CHECK(c.train.loss.beta == 0.25);
    CHECK(c.train.loss.gamma == 0.1);
    CHECK(c.train.train_noise.kind == NoiseKind::kPreferenceFlip);
    CHECK(c.train.train_noise.gamma == 0.2);
    CHECK(c.train.eval_noise.kind == NoiseKind::kSegmentPerturb);
    CHECK(c.aspect_weights.correctness == 0.3);
    CHECK(c.reference_init == ReferenceInit::kRandom);
    CHECK(c.train_config().seed == 9);
    CHECK(c.generator_config().vocab_size == 12);
  }
  SUBCASE("derived seeds are stable and distinct") {
    const RunConfig a = parse_run_config(R"({"seed": 3})");
    CHECK(a.train_config().eval_noise.seed == default_eval_noise_seed(3));
    CHECK(default_eval_noise_seed(3) != default_train_noise_seed(3));
    const RunConfig b = parse_run_config(R"({"seed": 3, "eval_noise_seed": 77})");
    CHECK(b.train_config().eval_noise.seed == 77);
  }
  SUBCASE("resolved config round trips") {
    const RunConfig a = parse_run_config(R"({"seed": 5, "variant": "robust_dpo", "epsilon": 0.2})");
    const RunConfig b = parse_run_config(run_config_to_json(a));
    CHECK(run_config_to_json(a) == run_config_to_json(b));
  }
  SUBCASE("rejections") {
    CHECK(code_of([] { parse_run_config(R"({"learning_rat": 0.1})"); }) == ErrorCode::kInvalidConfig);
    CHECK(code_of([] { parse_run_config(R"({"variant": "ppo"})"); }) == ErrorCode::kInvalidConfig);
    CHECK(code_of([] { parse_run_config("[1, 2]"); }) == ErrorCode::kInvalidConfig);
    CHECK_THROWS_AS(parse_run_config("{"), Error);
    CHECK(code_of([] { parse_run_config(R"({"num_pairs": 0})").validate(); }) == ErrorCode::kInvalidConfig);
    CHECK(code_of([] { parse_run_config(R"({"aspect_weights": [0.5, 0.5, 0.5, 0, 0]})").validate(); }) ==
          ErrorCode::kInvalidWeights);
    CHECK(code_of([] { parse_run_config(R"({"train_noise": "flip", "train_noise_gamma": 0.6})").validate(); }) ==
          ErrorCode::kInvalidNoise);
  }
}

TEST_CASE("command-line overrides") {
  TempDir dir("overrides");
  write(dir.path / "c.json", R"({"seed": 2, "variant": "dpo"})");
  CommandOptions o;
  o.config = dir.path / "c.json";
  o.seed = 8;
  o.variant = "dpo_2d";
  o.noise = "flip";
  o.gamma = 0.1;
  const RunConfig c = resolve_config(o);
  CHECK(c.seed == 8);
  CHECK(c.train.loss.variant == LossVariant::kDpo2D);
  CHECK(c.train.train_noise.kind == NoiseKind::kPreferenceFlip);
  CHECK(c.train.train_noise.gamma == 0.1);
}

TEST_CASE("splits") {
  const RunConfig c = parse_run_config(R"({"num_pairs": 200, "eval_fraction": 0.25})");
  const Splits a = load_splits(c);
  const Splits b = load_splits(c);
  CHECK(a.train.pairs.size() == 150);
  CHECK(a.eval.pairs.size() == 50);
  CHECK(a.train.pairs == b.train.pairs);
  CHECK(a.eval.pairs == b.eval.pairs);
  const RunConfig missing = parse_run_config(R"({"dataset": "/nonexistent/prefopt.jsonl"})");
  CHECK(code_of([&] { load_splits(missing); }) == ErrorCode::kIo);
}

TEST_CASE("matrix csv") {
  CHECK(matrix_csv_line({"Vanilla DPO", 0.5, 0.25}) == "Vanilla DPO,0.500000,0.250000");
}

TEST_CASE("command-line tool") {
  TempDir dir("cli");
  const fs::path cfg = dir.path / "small.json";
  write(cfg, kSmallConfig);
  const fs::path log = dir.path / "log.txt";
  const std::string base = "--config \"" + cfg.string() + "\" ";

  SUBCASE("gen-data writes the requested number of pairs") {
    REQUIRE(run_cli("gen-data " + base + "--out \"" + (dir.path / "g").string() + "\"", log) == 0);
    std::ifstream in(dir.path / "g" / "dataset.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) lines += !line.empty();
    CHECK(lines == 300);
  }
  SUBCASE("train is reproducible and eval reproduces the logged win rate") {
    const fs::path a = dir.path / "a", b = dir.path / "b";
    REQUIRE(run_cli("train " + base + "--out \"" + a.string() + "\" --quiet", log) == 0);
    REQUIRE(run_cli("train " + base + "--out \"" + b.string() + "\" --quiet", log) == 0);
    CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
    CHECK(slurp(a / "checkpoint.json") == slurp(b / "checkpoint.json"));

    std::istringstream metrics(slurp(a / "metrics.jsonl"));
    std::string line, last;
    while (std::getline(metrics, line)) {
      if (!line.empty()) last = line;
    }
    const double logged = nlohmann::json::parse(last)["eval_win_rate"];

    REQUIRE(run_cli("eval " + base + "--checkpoint \"" + (a / "checkpoint.json").string() + "\" --dataset \"" +
                        (a / "eval_split.jsonl").string() + "\" --out \"" + (dir.path / "e").string() + "\"",
                    log) == 0);
    const auto report = nlohmann::json::parse(slurp(dir.path / "e" / "eval.json"));
    CHECK(report["win_rate"].get<double>() == logged);
  }
  SUBCASE("exit codes") {
    CHECK(run_cli("train " + base + "--variant dpo --eval-noise segment --out \"" + (dir.path / "x").string() + "\"",
                  log) == 2);
    CHECK(run_cli("train " + base + "--dataset /nonexistent/d.jsonl --out \"" + (dir.path / "x").string() + "\"",
                  log) == 2);
    write(dir.path / "bad.json", R"({"num_pairs": 0})");
    CHECK(run_cli("gen-data --config \"" + (dir.path / "bad.json").string() + "\"", log) == 2);
    CHECK(run_cli("train --no-such-flag", log) == 2);
    write(dir.path / "diverge.json",
          R"({"num_pairs": 100, "vocab_size": 8, "iterations": 50, "learning_rate": 1e308, "beta": 1.0})");
    CHECK(run_cli("train --quiet --config \"" + (dir.path / "diverge.json").string() + "\" --out \"" +
                      (dir.path / "d").string() + "\"",
                  log) == 3);
  }
  SUBCASE("verify") {
    CHECK(run_cli("verify --seed 2", log) == 0);
    CHECK(slurp(log).find("FAIL") == std::string::npos);
    CHECK(run_cli("verify --seed 2 --fault-invert-robust-denominator", log) == 1);
    CHECK(slurp(log).find("FAIL robust_dpo_unbiased") != std::string::npos);
  }
}

}
