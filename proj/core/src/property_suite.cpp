#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/eval.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/noise.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt {

namespace {

constexpr std::size_t kVocab = 8;
const double kFlipRates[] = {0.05, 0.1, 0.25, 0.4};

struct Instance {
  PolicyParams params;
  ReferencePolicy ref;
  PreferencePair pair;
  double beta;
};

Instance draw_instance(Rng& rng, const InstanceShape& shape = {}) {
  PolicyParams params = PolicyParams::random(shape.vocab_size, rng.next_u64(), 0.7);
  ReferencePolicy ref(PolicyParams::random(shape.vocab_size, rng.next_u64(), 0.5).logits);
  PreferencePair pair = random_pair(rng, shape);
  const double beta = 0.1 + 0.9 * rng.uniform01();
  return {std::move(params), std::move(ref), std::move(pair), beta};
}

PropertyResult upper_bounded(std::string name, double measured, double tolerance,
                             std::string detail) {
  return {std::move(name), measured < tolerance, measured, tolerance, std::move(detail)};
}

PropertyResult check_lemma() {
  double worst = 0.0;
  std::size_t equal_count = 0;
  bool equal_at_zero = false;
  for (int i = 0; i <= 2000; ++i) {
    const double x = static_cast<double>(i - 1000) / 100.0;
    worst = std::max(worst, std::abs(log_sigmoid(x) - log_sigmoid(-x) - x));
    if (lemma_sigmoid_symmetry_check(x)) {
      ++equal_count;
      equal_at_zero = equal_at_zero || x == 0.0;
    }
  }
  PropertyResult r = upper_bounded(
      "lemma_sigmoid_symmetry", worst, 1e-10,
      "log sigma(x) - log sigma(-x) = x on 2001 grid points; equality only at x = 0");
  r.passed = r.passed && equal_count == 1 && equal_at_zero;
  if (!(equal_count == 1 && equal_at_zero)) {
    r.detail += " (equality held at " + std::to_string(equal_count) + " points)";
  }
  return r;
}

PropertyResult check_logit_identity(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double h = -5.0 + 10.0 * rng.uniform01();
    const double beta = 0.05 + 1.95 * rng.uniform01();
    worst = std::max(worst, std::abs(logit(btl_preference_prob(h, beta)) - beta * h));
  }
  return upper_bounded("logit_identity", worst, 1e-10,
                       "logit(sigma(beta h)) = beta h over 1000 random (h, beta)");
}

PropertyResult check_dpo_unbiasedness(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance in = draw_instance(rng);
    const double clean = dpo_loss(in.params, in.ref, in.pair, in.beta).value;
    for (double eps : kFlipRates) {
      const double kept = robust_dpo_loss(in.params, in.ref, in.pair, in.beta, eps).value;
      const double flipped =
          robust_dpo_loss(in.params, in.ref, in.pair.swapped(), in.beta, eps).value;
      worst = std::max(worst, std::abs((1.0 - eps) * kept + eps * flipped - clean));
    }
  }
  return upper_bounded("robust_dpo_unbiased", worst, 1e-12,
                       "flip expectation of robust_dpo equals dpo; 100 pairs x eps in "
                       "{0.05,0.1,0.25,0.4}");
}

PropertyResult check_flip2d_unbiasedness(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance in = draw_instance(rng);
    const double clean = group_loss_2d(in.params, in.ref, in.pair, in.beta).value;
    for (double gamma : kFlipRates) {
      const double kept = robust_group_loss_flip(in.params, in.ref, in.pair, in.beta, gamma).value;
      const double flipped =
          robust_group_loss_flip(in.params, in.ref, in.pair.swapped(), in.beta, gamma).value;
      worst = std::max(worst, std::abs((1.0 - gamma) * kept + gamma * flipped - clean));
    }
  }
  return upper_bounded("robust_2d_flip_unbiased", worst, 1e-12,
                       "flip expectation of robust_2d_flip equals the 2D group loss; 100 pairs");
}

PropertyResult check_conservative_bias(Rng& rng) {
  constexpr double kEps = 0.3;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Instance in = draw_instance(rng);
    in.params.logits.scale(3.0);
    const double margin = dpo_margin(in.params, in.ref, in.pair, in.beta);
    if (std::abs(margin) <= 0.5) continue;
    const double clean = dpo_loss(in.params, in.ref, in.pair, in.beta).value;
    const double expected =
        (1.0 - kEps) * conservative_dpo_loss(in.params, in.ref, in.pair, in.beta, kEps).value +
        kEps * conservative_dpo_loss(in.params, in.ref, in.pair.swapped(), in.beta, kEps).value;
    const double gap = std::abs(expected - clean);
    std::ostringstream detail;
    detail << "eps=0.3, margin=" << margin << ": |E[conservative] - clean| must exceed 1e-3";
    return {"conservative_dpo_biased", gap > 1e-3, gap, 1e-3, detail.str()};
  }
  return {"conservative_dpo_biased", false, 0.0, 1e-3, "no pair with |margin| > 0.5 found"};
}

PropertyResult check_conservative_jensen(Rng& rng) {
  double worst_violation = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Instance in = draw_instance(rng);
    in.params.logits.scale(1.0 + 3.0 * rng.uniform01());
    const double eps = 0.49 * rng.uniform01();
    const double m = dpo_margin(in.params, in.ref, in.pair, in.beta);
    const double bound = -std::log((1.0 - eps) * sigmoid(m) + eps * sigmoid(-m));
    const double value = conservative_dpo_loss(in.params, in.ref, in.pair, in.beta, eps).value;
    worst_violation = std::max(worst_violation, bound - value);
  }
  return upper_bounded("conservative_dpo_jensen_bound", worst_violation, 1e-12,
                       "conservative loss >= -log[(1-eps) sigma(m) + eps sigma(-m)]; 1000 pairs");
}

PropertyResult check_reduction(Rng& rng) {
  InstanceShape shape;
  shape.single_segment = true;
  shape.unit_scores = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance in = draw_instance(rng, shape);
    worst = std::max(worst, std::abs(group_loss_2d(in.params, in.ref, in.pair, in.beta).value -
                                     dpo_loss(in.params, in.ref, in.pair, in.beta).value));
  }
  return upper_bounded("group_2d_reduces_to_dpo", worst, 1e-12,
                       "single segment, unit scores: 2D group loss equals DPO; 100 pairs");
}

PropertyResult check_gradient(Rng& rng, LossVariant variant) {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Instance in = draw_instance(rng);
    const double eps = 0.45 * rng.uniform01();
    const double delta = rng.uniform01();
    std::function<LossReport(const PolicyParams&)> eval;
    switch (variant) {
      case LossVariant::kDpo:
        eval = [&](const PolicyParams& p) { return dpo_loss(p, in.ref, in.pair, in.beta); };
        break;
      case LossVariant::kConservativeDpo:
        eval = [&](const PolicyParams& p) {
          return conservative_dpo_loss(p, in.ref, in.pair, in.beta, eps);
        };
        break;
      case LossVariant::kRobustDpo:
        eval = [&](const PolicyParams& p) {
          return robust_dpo_loss(p, in.ref, in.pair, in.beta, eps);
        };
        break;
      case LossVariant::kDpo2D:
        eval = [&](const PolicyParams& p) { return group_loss_2d(p, in.ref, in.pair, in.beta); };
        break;
      case LossVariant::kRobust2DFlip:
        eval = [&](const PolicyParams& p) {
          return robust_group_loss_flip(p, in.ref, in.pair, in.beta, eps);
        };
        break;
      case LossVariant::kRobust2DSegment:
        eval = [&](const PolicyParams& p) {
          return noisy_group_loss_2d(p, in.ref, in.pair, in.beta, delta);
        };
        break;
    }
    const Gradient analytic = eval(in.params).gradient;
    const Gradient numeric = finite_diff_gradient(
        [&](const PolicyParams& p) { return eval(p).value; }, in.params, 1e-5);
    worst = std::max(worst, relative_error(analytic.values, numeric.values));
  }
  return upper_bounded("gradient_" + std::string(to_string(variant)), worst, 1e-5,
                       "analytic vs central differences (h=1e-5), 50 instances, V=8");
}

PropertyResult check_log_prob_gradient(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PolicyParams params = PolicyParams::random(kVocab, rng.next_u64(), 1.0);
    const Token prev = static_cast<Token>(rng.uniform_index(kVocab));
    const Token next = static_cast<Token>(rng.uniform_index(kVocab));
    const Gradient analytic = log_prob_grad(params, prev, next);
    const Gradient numeric = finite_diff_gradient(
        [&](const PolicyParams& p) { return log_prob(p, prev, next); }, params, 1e-5);
    worst = std::max(worst, relative_error(analytic.values, numeric.values));
  }
  return upper_bounded("gradient_log_prob", worst, 1e-6,
                       "log_prob_grad vs central differences, 100 random draws");
}

PropertyResult check_normalization(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PolicyParams params = PolicyParams::random(kVocab, rng.next_u64(), 3.0);
    for (Token prev = 0; prev < kVocab; ++prev) {
      double total = 0.0;
      for (Token next = 0; next < kVocab; ++next) total += std::exp(log_prob(params, prev, next));
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return upper_bounded("policy_normalization", worst, 1e-12,
                       "per-context probabilities sum to 1; 100 random tables");
}

PropertyResult check_mc_quadrature(Rng& rng) {
  double worst_ratio = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double x = -5.0 + 10.0 * rng.uniform01();
    const double y = -5.0 + 10.0 * rng.uniform01();
    const McQuadratureResult r = mc_vs_quadrature(x, y, 100000, rng.next_u64());
    const double gap = std::abs(r.mc_estimate - r.quadrature_value);
    worst_ratio = std::max(worst_ratio, r.std_err > 0.0 ? gap / r.std_err : gap);
  }
  return upper_bounded("noisy_loss_mc_vs_quadrature", worst_ratio, 3.0,
                       "|MC - Gauss-Legendre| in standard errors; 10 draws of |X|,|Y| <= 5, "
                       "1e5 samples");
}

PropertyResult check_perturbation(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PreferencePair pair = random_pair(rng, {});
    const double delta = rng.uniform01();
    const PreferencePair noisy = perturb_scores(pair, delta);
    for (std::size_t k = 0; k < pair.winner.segments.size(); ++k) {
      const double before = *pair.winner.segments[k].score - *pair.loser.segments[k].score;
      const double after = *noisy.winner.segments[k].score - *noisy.loser.segments[k].score;
      worst = std::max(worst, std::abs((before - after) - 2.0 * delta));
    }
  }
  return upper_bounded("perturbation_shrinks_margin_by_2delta", worst, 1e-12,
                       "per-segment winner-loser score margin shrinks by exactly 2 delta");
}

PropertyResult check_noisy_monotone(Rng& rng) {
  std::size_t checked = 0;
  double worst_increase = 0.0;
  for (int attempt = 0; attempt < 2000 && checked < 50; ++attempt) {
    const Instance in = draw_instance(rng);
    const auto terms = segment_terms(in.params, in.ref, in.pair, in.beta);
    const bool eligible = std::all_of(terms.begin(), terms.end(), [](const SegmentTerm& t) {
      return t.x > 0.0 && t.y > 0.0;
    });
    if (!eligible) continue;
    ++checked;
    double previous = -1.0;
    for (int step = 0; step <= 10; ++step) {
      const double value =
          noisy_group_loss_2d(in.params, in.ref, in.pair, in.beta, step / 10.0).value;
      if (step > 0) worst_increase = std::max(worst_increase, previous - value);
      previous = value;
    }
  }
  PropertyResult r = upper_bounded("noisy_loss_monotone_in_delta", worst_increase, 1e-12,
                                   "X_k > 0, Y_k > 0: loss nondecreasing over delta grid");
  r.detail += "; " + std::to_string(checked) + " instances";
  r.passed = r.passed && checked > 0;
  return r;
}

PropertyResult check_noisy_reduction(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Instance in = draw_instance(rng);
    worst = std::max(
        worst, std::abs(noisy_group_loss_2d(in.params, in.ref, in.pair, in.beta, 0.0).value -
                        group_loss_2d(in.params, in.ref, in.pair, in.beta).value));
  }
  return upper_bounded("noisy_loss_delta_zero", worst, 1e-12,
                       "noisy group loss at delta = 0 equals the 2D group loss");
}

PropertyResult check_win_rate_antisymmetry(Rng& rng) {
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 200; ++i) pairs.push_back(random_pair(rng, {}));
  std::vector<PreferencePair> swapped;
  for (const PreferencePair& p : pairs) swapped.push_back(p.swapped());
  const PolicyParams params = PolicyParams::random(kVocab, rng.next_u64(), 1.0);
  const ReferencePolicy ref = ReferencePolicy::uniform(kVocab);
  double worst = 0.0;
  for (LossVariant v : {LossVariant::kDpo, LossVariant::kDpo2D}) {
    const EvalReport a = win_rate(params, ref, pairs, v, 0.5);
    const EvalReport b = win_rate(params, ref, swapped, v, 0.5);
    const auto zeros = std::count(a.margins.begin(), a.margins.end(), 0.0);
    const double expected = 1.0 - static_cast<double>(zeros) / static_cast<double>(pairs.size());
    worst = std::max(worst, std::abs(a.win_rate + b.win_rate - expected));
  }
  return upper_bounded("win_rate_antisymmetry", worst, 1e-12,
                       "win rate plus win rate of the swapped set equals 1 minus ties");
}

}  // namespace

bool PropertyReport::all_passed() const {
  return !results.empty() &&
         std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.passed; });
}

std::string PropertyReport::to_json() const {
  nlohmann::ordered_json props = nlohmann::ordered_json::array();
  for (const PropertyResult& r : results) {
    props.push_back({{"name", r.name},
                     {"passed", r.passed},
                     {"measured", r.measured},
                     {"tolerance", r.tolerance},
                     {"detail", r.detail}});
  }
  const nlohmann::ordered_json doc = {
      {"seed", seed}, {"all_passed", all_passed()}, {"properties", std::move(props)}};
  return doc.dump(2) + "\n";
}

std::string PropertyReport::to_text() const {
  std::ostringstream out;
  std::size_t passed = 0;
  for (const PropertyResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  measured=" << r.measured
        << " tolerance=" << r.tolerance << "  (" << r.detail << ")\n";
    passed += r.passed ? 1 : 0;
  }
  out << passed << "/" << results.size() << " properties passed (seed " << seed << ")\n";
  return out.str();
}

PropertyReport run_property_suite(std::uint64_t seed) {
  PropertyReport report;
  report.seed = seed;
  // Each check draws from its own stream so adding a check leaves the others
  // unchanged.
  std::uint64_t stream = 0;
  auto next_rng = [&] { return Rng(derive_seed(seed, ++stream)); };
  auto run = [&](const std::string& name, const std::function<PropertyResult()>& check) {
    try {
      report.results.push_back(check());
    } catch (const std::exception& e) {
      report.results.push_back({name, false, 0.0, 0.0, std::string("threw: ") + e.what()});
    }
  };

  run("lemma_sigmoid_symmetry", [&] { return check_lemma(); });
  run("logit_identity", [&] { auto r = next_rng(); return check_logit_identity(r); });
  run("robust_dpo_unbiased", [&] { auto r = next_rng(); return check_dpo_unbiasedness(r); });
  run("robust_2d_flip_unbiased", [&] { auto r = next_rng(); return check_flip2d_unbiasedness(r); });
  run("conservative_dpo_biased", [&] { auto r = next_rng(); return check_conservative_bias(r); });
  run("conservative_dpo_jensen_bound",
      [&] { auto r = next_rng(); return check_conservative_jensen(r); });
  run("group_2d_reduces_to_dpo", [&] { auto r = next_rng(); return check_reduction(r); });
  run("noisy_loss_delta_zero", [&] { auto r = next_rng(); return check_noisy_reduction(r); });
  run("noisy_loss_monotone_in_delta", [&] { auto r = next_rng(); return check_noisy_monotone(r); });
  run("noisy_loss_mc_vs_quadrature", [&] { auto r = next_rng(); return check_mc_quadrature(r); });
  run("policy_normalization", [&] { auto r = next_rng(); return check_normalization(r); });
  run("gradient_log_prob", [&] { auto r = next_rng(); return check_log_prob_gradient(r); });
  for (LossVariant v : {LossVariant::kDpo, LossVariant::kConservativeDpo, LossVariant::kRobustDpo,
                        LossVariant::kDpo2D, LossVariant::kRobust2DFlip,
                        LossVariant::kRobust2DSegment}) {
    run("gradient_" + std::string(to_string(v)), [&] { auto r = next_rng(); return check_gradient(r, v); });
  }
  run("perturbation_shrinks_margin_by_2delta",
      [&] { auto r = next_rng(); return check_perturbation(r); });
  run("win_rate_antisymmetry", [&] { auto r = next_rng(); return check_win_rate_antisymmetry(r); });
  return report;
}

}  // namespace prefopt
