// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prefopt/app/commands.hpp"
#include "prefopt/eval.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/noise.hpp"
#include "prefopt/trainer.hpp"

using namespace prefopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Instance {
  PolicyParams params;
  ReferencePolicy ref;
  PreferencePair pair;
};

Instance draw(Rng& rng, const InstanceShape& shape = {}) {
  PolicyParams params = PolicyParams::random(shape.vocab_size, rng.next_u64(), 1.0);
  ReferencePolicy ref(PolicyParams::random(shape.vocab_size, rng.next_u64(), 0.5).logits);
  return {std::move(params), std::move(ref), random_pair(rng, shape)};
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome unbiasedness() {
  Rng rng(101);
  double worst_dpo = 0.0, worst_2d = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance x = draw(rng);
    const PreferencePair back = x.pair.swapped();
    const double clean = dpo_loss(x.params, x.ref, x.pair, 0.5).value;
    const double clean_2d = group_loss_2d(x.params, x.ref, x.pair, 0.5).value;
    for (double eps : {0.05, 0.1, 0.25, 0.4}) {
      const double e = (1 - eps) * robust_dpo_loss(x.params, x.ref, x.pair, 0.5, eps).value +
                       eps * robust_dpo_loss(x.params, x.ref, back, 0.5, eps).value;
      worst_dpo = std::max(worst_dpo, std::abs(e - clean));
      const double e2 = (1 - eps) * robust_group_loss_flip(x.params, x.ref, x.pair, 0.5, eps).value +
                        eps * robust_group_loss_flip(x.params, x.ref, back, 0.5, eps).value;
      worst_2d = std::max(worst_2d, std::abs(e2 - clean_2d));
    }
  }
  return {worst_dpo < 1e-12 && worst_2d < 1e-12, fmt("max |dev| dpo=%.2e 2d=%.2e", worst_dpo, worst_2d)};
}

Outcome conservative_bias() {
  Rng rng(202);
  for (int i = 0; i < 1000; ++i) {
    const Instance x = draw(rng);
    const double margin = dpo_margin(x.params, x.ref, x.pair, 1.0);
    if (std::abs(margin) <= 0.5) continue;
    const double eps = 0.3;
    const double expected = (1 - eps) * conservative_dpo_loss(x.params, x.ref, x.pair, 1.0, eps).value +
                            eps * conservative_dpo_loss(x.params, x.ref, x.pair.swapped(), 1.0, eps).value;
    const double clean = static_cast<double>(oracle::dpo_loss(x.params, x.ref, x.pair, 1.0));
    const double gap = std::abs(expected - clean);
    return {gap > 1e-3, fmt("margin=%.3f |E[conservative] - clean|=%.4f", margin, gap)};
  }
  return {false, "no pair with |margin| > 0.5"};
}

Outcome sigmoid_lemma() {
  double worst = 0.0;
  int equal = 0;
  bool equal_only_at_zero = true;
  for (int k = 0; k <= 2000; ++k) {
    const double x = -10.0 + k * 0.01;
    worst = std::max(worst, std::abs(log_sigmoid(x) - log_sigmoid(-x) - x));
    const bool eq = lemma_sigmoid_symmetry_check(x);
    equal += eq;
    if (eq != (k == 1000)) equal_only_at_zero = false;
  }
  return {worst < 1e-10 && equal == 1 && equal_only_at_zero,
          fmt("max |residual|=%.2e, equal at %.0f point(s)", worst, equal)};
}

Outcome gradients() {
  const std::vector<LossVariant> variants = {LossVariant::kDpo,    LossVariant::kConservativeDpo,
                                             LossVariant::kRobustDpo, LossVariant::kDpo2D,
                                             LossVariant::kRobust2DFlip, LossVariant::kRobust2DSegment};
  Rng rng(303);
  double worst = 0.0;
  for (LossVariant v : variants) {
    const LossConfig cfg{v, 0.7, 0.2, 0.2};
    for (int i = 0; i < 50; ++i) {
      const Instance x = draw(rng);
      const std::vector<PreferencePair> batch = {x.pair};
      const std::vector<double> deltas = {rng.uniform01()};
      const LossReport r = loss_and_grad(cfg, x.params, x.ref, batch, deltas);
      const Gradient fd = finite_diff_gradient(
          [&](const PolicyParams& p) { return loss_and_grad(cfg, p, x.ref, batch, deltas).value; }, x.params, 1e-5);
      worst = std::max(worst, oracle::rel_diff(r.gradient.values, fd.values));
    }
  }
  return {worst < 1e-5, fmt("max relative error %.2e over 6 variants x 50 instances", worst)};
}

Outcome reduction() {
  Rng rng(404);
  InstanceShape shape;
  shape.single_segment = true;
  shape.unit_scores = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance x = draw(rng, shape);
    worst = std::max(worst, std::abs(group_loss_2d(x.params, x.ref, x.pair, 0.5).value -
                                     dpo_loss(x.params, x.ref, x.pair, 0.5).value));
  }
  return {worst < 1e-12, fmt("max |group - dpo|=%.2e", worst)};
}

Outcome mc_quadrature() {
  Rng rng(505);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double x = 10.0 * rng.uniform01() - 5.0;
    const double y = 10.0 * rng.uniform01() - 5.0;
    const McQuadratureResult r = mc_vs_quadrature(x, y, 100000, rng.next_u64());
    worst = std::max(worst, std::abs(r.mc_estimate - r.quadrature_value) / r.std_err);
  }
  return {worst < 3.0, fmt("max |MC - quadrature| = %.2f standard errors", worst)};
}

Outcome trend(const fs::path& config_path) {
  double drop = 0.0;
  int robust_wins = 0;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    app::RunConfig config = app::load_run_config(config_path);
    config.seed = seed;
    config.validate();
    const auto result = app::run_matrix(config, app::load_splits(config));
    const double clean = result[1].eval_win_rate;
    const double noisy = result[2].eval_win_rate;
    const double robust = result[3].eval_win_rate;
    drop += (clean - noisy) / 5.0;
    robust_wins += robust > noisy;
    rows += fmt(" [seed %.0f: %.3f/%.3f/", static_cast<double>(seed), clean, noisy) + fmt("%.3f]", robust);
  }
  return {drop >= 0.02 && robust_wins >= 4,
          fmt("mean noise drop %.2f pt, robust > 2D under noise on %.0f/5 seeds;", 100.0 * drop, robust_wins) + rows};
}

Outcome determinism(const fs::path& config_path) {
  const fs::path root = fs::temp_directory_path() / "prefopt-acceptance-determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  for (const char* run : {"a", "b"}) {
    app::CommandOptions o;
    o.config = config_path;
    o.out = root / run;
    o.quiet = true;
    if (app::cmd_train(o, sink, sink) != app::kExitOk) return {false, "train failed: " + sink.str()};
  }
  const bool same_metrics = slurp(root / "a" / "metrics.jsonl") == slurp(root / "b" / "metrics.jsonl");
  const bool same_ckpt = slurp(root / "a" / "checkpoint.json") == slurp(root / "b" / "checkpoint.json");
  const bool non_empty = !slurp(root / "a" / "metrics.jsonl").empty();
  fs::remove_all(root);
  return {same_metrics && same_ckpt && non_empty,
          std::string("metrics ") + (same_metrics ? "identical" : "differ") + ", checkpoint " +
              (same_ckpt ? "identical" : "differ")};
}

Outcome noise_statistics() {
  const std::size_t n = 10000;
  const double gamma = 0.3;
  const auto mask = flip_mask(n, gamma, 606);
  std::size_t flipped = 0;
  for (bool b : mask) flipped += b;
  const double rate = static_cast<double>(flipped) / n;
  const double se = std::sqrt(gamma * (1 - gamma) / n);
  const bool rate_ok = std::abs(rate - gamma) < 3.0 * se;

  Rng rng(607);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PreferencePair p = random_pair(rng, {});
    const double delta = rng.uniform01();
    const PreferencePair q = perturb_scores(p, delta);
    for (std::size_t k = 0; k < p.winner.segments.size(); ++k) {
      const double before = *p.winner.segments[k].score - *p.loser.segments[k].score;
      const double after = *q.winner.segments[k].score - *q.loser.segments[k].score;
      worst = std::max(worst, std::abs((before - after) - 2.0 * delta));
    }
  }
  return {rate_ok && worst < 1e-12,
          fmt("flip rate %.4f (|dev| %.2f SE), max |shrink - 2 delta| %.1e", rate, std::abs(rate - gamma) / se, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs = argc > 1 ? fs::path(argv[1]) : fs::path(PREFOPT_CONFIG_DIR);
  struct Criterion {
    int id;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 5.0, unbiasedness},
      {2, 1.0, conservative_bias},
      {3, 1.0, sigmoid_lemma},
      {4, 60.0, gradients},
      {5, 5.0, reduction},
      {6, 30.0, mc_quadrature},
      {7, 900.0, [&] { return trend(configs / "trend.json"); }},
      {8, 120.0, [&] { return determinism(configs / "quick.json"); }},
      {9, 5.0, noise_statistics},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.budget_seconds;
    const bool passed = o.passed && in_time;
    failures += !passed;
    std::printf("criterion %d: %s  (%.2fs of %.0fs) %s%s\n", c.id, passed ? "PASS" : "FAIL", seconds,
                c.budget_seconds, o.detail.c_str(), in_time ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
