#include "prefopt/losses.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "evaluator.hpp"
#include "prefopt/errors.hpp"

namespace prefopt {

namespace fault {
namespace {
std::atomic<bool> g_invert_robust_denominator{false};
}
void set_invert_robust_denominator(bool enabled) { g_invert_robust_denominator = enabled; }
bool invert_robust_denominator() { return g_invert_robust_denominator; }
}  // namespace fault

namespace {

using detail::Evaluator;
using detail::SegmentRatios;

void check_flip_rate(double rate, const char* name) {
  if (!(rate >= 0.0 && rate < 0.5)) {
    throw Error(ErrorCode::kInvalidNoise,
                std::string(name) + " must lie in [0, 0.5), got " + std::to_string(rate));
  }
}

void check_delta(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::kInvalidNoise, "delta must lie in [0, 1], got " + std::to_string(delta));
  }
}

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidConfig, "beta must be positive and finite");
  }
}

// Scalar pieces of the two-branch flip losses as functions of the sigmoid
// argument m: L(w,l) = -log sigma(m), L(l,w) = -log sigma(-m).
struct BranchValue {
  double value;
  double slope;  // d value / d m
};

BranchValue clean_branch(double m) { return {-log_sigmoid(m), -sigmoid(-m)}; }

BranchValue conservative_branch(double m, double eps) {
  return {(1.0 - eps) * -log_sigmoid(m) + eps * -log_sigmoid(-m),
          -(1.0 - eps) * sigmoid(-m) + eps * sigmoid(m)};
}

BranchValue debiased_branch(double m, double rate, bool invert = false) {
  const double numerator = (1.0 - rate) * -log_sigmoid(m) - rate * -log_sigmoid(-m);
  const double numerator_slope = -(1.0 - rate) * sigmoid(-m) - rate * sigmoid(m);
  const double scale = invert ? (1.0 - 2.0 * rate) : 1.0 / (1.0 - 2.0 * rate);
  return {numerator * scale, numerator_slope * scale};
}

// Per-pair loss of any variant. When `acc` is given, weight * d loss / d
// logits is accumulated into it.
double pair_loss(const Evaluator& ev, const LossConfig& config, const PreferencePair& pair,
                 double delta, GradientAccumulator* acc, double weight,
                 std::vector<SegmentTerm>* terms) {
  pair.validate(ev.vocab_size());

  if (!is_two_dimensional(config.variant)) {
    const double m = detail::response_margin(ev, pair);
    BranchValue branch{};
    switch (config.variant) {
      case LossVariant::kDpo: branch = clean_branch(m); break;
      case LossVariant::kConservativeDpo: branch = conservative_branch(m, config.epsilon); break;
      case LossVariant::kRobustDpo:
        branch = debiased_branch(m, config.epsilon, fault::invert_robust_denominator());
        break;
      default: break;
    }
    if (acc) detail::response_margin_grad(ev, pair, *acc, weight * branch.slope);
    if (terms) terms->push_back({m, 0.0, m});
    return branch.value;
  }

  const double shift = config.variant == LossVariant::kRobust2DSegment ? delta : 0.0;
  const auto ratios = detail::segment_ratios(ev, pair);
  const Token ctx = pair.prompt.back();
  double total = 0.0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const SegmentRatios& r = ratios[k];
    const double x = r.winner_score * r.winner - r.loser_score * r.loser;
    const double y = r.winner + r.loser;
    // d x_eff / d l_w and d x_eff / d l_l for x_eff = x - shift * y.
    const double winner_coef = r.winner_score - shift;
    const double loser_coef = -(r.loser_score + shift);
    const double arg = x - shift * y;
    const BranchValue branch = config.variant == LossVariant::kRobust2DFlip
                                   ? debiased_branch(arg, config.gamma)
                                   : clean_branch(arg);
    total += branch.value;
    if (terms) terms->push_back({x, y, arg});
    if (acc) {
      const Segment& w = pair.winner.segments[k];
      const Segment& l = pair.loser.segments[k];
      ev.span_grad(*acc, ctx, pair.winner.tokens, w.start, w.end(),
                   weight * branch.slope * winner_coef);
      ev.span_grad(*acc, ctx, pair.loser.tokens, l.start, l.end(),
                   weight * branch.slope * loser_coef);
    }
  }
  return total;
}

LossReport single_pair(const PolicyParams& params, const ReferencePolicy& ref,
                       const PreferencePair& pair, const LossConfig& config, double delta) {
  const Evaluator ev(params, ref, config.beta);
  GradientAccumulator acc(ev.vocab_size());
  LossReport report;
  report.value = pair_loss(ev, config, pair, delta, &acc, 1.0, &report.per_segment);
  report.gradient = acc.finish(ev.theta());
  return report;
}

}  // namespace

std::string_view to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::kDpo: return "dpo";
    case LossVariant::kConservativeDpo: return "conservative_dpo";
    case LossVariant::kRobustDpo: return "robust_dpo";
    case LossVariant::kDpo2D: return "dpo_2d";
    case LossVariant::kRobust2DFlip: return "robust_2d_flip";
    case LossVariant::kRobust2DSegment: return "robust_2d_segment";
  }
  return "unknown";
}

LossVariant parse_variant(std::string_view name) {
  for (LossVariant v : {LossVariant::kDpo, LossVariant::kConservativeDpo, LossVariant::kRobustDpo,
                        LossVariant::kDpo2D, LossVariant::kRobust2DFlip,
                        LossVariant::kRobust2DSegment}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown loss variant \"" + std::string(name) + "\"");
}

bool is_two_dimensional(LossVariant variant) {
  return variant == LossVariant::kDpo2D || variant == LossVariant::kRobust2DFlip ||
         variant == LossVariant::kRobust2DSegment;
}

void LossConfig::validate() const {
  check_beta(beta);
  check_flip_rate(epsilon, "epsilon");
  check_flip_rate(gamma, "gamma");
}

double btl_preference_prob(double h, double beta) {
  check_beta(beta);
  return sigmoid(beta * h);
}

double dpo_margin(const PolicyParams& params, const ReferencePolicy& ref,
                  const PreferencePair& pair, double beta) {
  const Evaluator ev(params, ref, beta);
  pair.validate(ev.vocab_size());
  return detail::response_margin(ev, pair);
}

LossReport dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                    const PreferencePair& pair, double beta) {
  return single_pair(params, ref, pair, {LossVariant::kDpo, beta, 0.0, 0.0}, 0.0);
}

LossReport conservative_dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                                 const PreferencePair& pair, double beta, double epsilon) {
  check_flip_rate(epsilon, "epsilon");
  return single_pair(params, ref, pair, {LossVariant::kConservativeDpo, beta, epsilon, 0.0}, 0.0);
}

LossReport robust_dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                           const PreferencePair& pair, double beta, double epsilon) {
  check_flip_rate(epsilon, "epsilon");
  return single_pair(params, ref, pair, {LossVariant::kRobustDpo, beta, epsilon, 0.0}, 0.0);
}

double corrected_preference_prob(double h, double beta, double epsilon) {
  check_flip_rate(epsilon, "epsilon");
  const double z = beta * h;
  return std::exp((1.0 - epsilon) * log_sigmoid(z) - epsilon * log_sigmoid(-z));
}

std::vector<SegmentTerm> segment_terms(const PolicyParams& params, const ReferencePolicy& ref,
                                       const PreferencePair& pair, double beta) {
  const Evaluator ev(params, ref, beta);
  pair.validate(ev.vocab_size());
  std::vector<SegmentTerm> out;
  for (const SegmentRatios& r : detail::segment_ratios(ev, pair)) {
    const double x = r.winner_score * r.winner - r.loser_score * r.loser;
    out.push_back({x, r.winner + r.loser, x});
  }
  return out;
}

LossReport group_loss_2d(const PolicyParams& params, const ReferencePolicy& ref,
                         const PreferencePair& pair, double beta) {
  return single_pair(params, ref, pair, {LossVariant::kDpo2D, beta, 0.0, 0.0}, 0.0);
}

LossReport noisy_group_loss_2d(const PolicyParams& params, const ReferencePolicy& ref,
                               const PreferencePair& pair, double beta, double delta) {
  check_delta(delta);
  return single_pair(params, ref, pair, {LossVariant::kRobust2DSegment, beta, 0.0, 0.0}, delta);
}

LossReport robust_group_loss_flip(const PolicyParams& params, const ReferencePolicy& ref,
                                  const PreferencePair& pair, double beta, double gamma) {
  check_flip_rate(gamma, "gamma");
  return single_pair(params, ref, pair, {LossVariant::kRobust2DFlip, beta, 0.0, gamma}, 0.0);
}

LossReport loss_and_grad(const LossConfig& config, const PolicyParams& params,
                         const ReferencePolicy& ref, std::span<const PreferencePair> batch,
                         std::span<const double> deltas) {
  config.validate();
  if (batch.empty()) throw Error(ErrorCode::kInvalidInput, "loss_and_grad needs a non-empty batch");
  const bool segment_noise = config.variant == LossVariant::kRobust2DSegment;
  if (segment_noise && deltas.size() != batch.size()) {
    throw Error(ErrorCode::kInvalidInput, "one delta per pair is required");
  }
  if (is_two_dimensional(config.variant)) {
    for (const PreferencePair& pair : batch) {
      if (!pair.scored()) {
        throw Error(ErrorCode::kInvalidConfig, std::string(to_string(config.variant)) +
                                                   " needs segment scores on every pair");
      }
    }
  }
  const Evaluator ev(params, ref, config.beta);
  GradientAccumulator acc(ev.vocab_size());
  const double weight = 1.0 / static_cast<double>(batch.size());
  LossReport report;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double delta = segment_noise ? deltas[i] : 0.0;
    if (segment_noise) check_delta(delta);
    total += pair_loss(ev, config, batch[i], delta, &acc, weight, &report.per_segment);
  }
  report.value = total * weight;
  report.gradient = acc.finish(ev.theta());
  return report;
}

LossReport loss_and_grad(const LossConfig& config, const PolicyParams& params,
                         const ReferencePolicy& ref, std::span<const PreferencePair> batch,
                         Rng& rng) {
  std::vector<double> deltas;
  if (config.variant == LossVariant::kRobust2DSegment) {
    deltas.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) deltas.push_back(rng.uniform01());
  }
  return loss_and_grad(config, params, ref, batch, deltas);
}

bool lemma_sigmoid_symmetry_check(double x) {
  return std::abs(log_sigmoid(x) - log_sigmoid(-x)) < 1e-12;
}

}  // namespace prefopt
