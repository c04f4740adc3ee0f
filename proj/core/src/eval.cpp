#include "prefopt/eval.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include "evaluator.hpp"
#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

double margin_with(const detail::Evaluator& ev, const PreferencePair& pair, LossVariant variant) {
  pair.validate(ev.vocab_size());
  if (!is_two_dimensional(variant)) return detail::response_margin(ev, pair);
  if (!pair.scored()) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(to_string(variant)) + " margins need segment scores");
  }
  double total = 0.0;
  for (const detail::SegmentRatios& r : detail::segment_ratios(ev, pair)) {
    total += r.winner_score * r.winner - r.loser_score * r.loser;
  }
  return total;
}

}  // namespace

double pair_margin(const PolicyParams& params, const ReferencePolicy& ref,
                   const PreferencePair& pair, LossVariant variant, double beta) {
  const detail::Evaluator ev(params, ref, beta);
  return margin_with(ev, pair, variant);
}

EvalReport win_rate(const PolicyParams& params, const ReferencePolicy& ref,
                    std::span<const PreferencePair> pairs, LossVariant variant, double beta) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidInput, "win rate of an empty dataset");
  const detail::Evaluator ev(params, ref, beta);
  EvalReport report;
  report.variant = variant;
  report.num_pairs = pairs.size();
  report.margins.reserve(pairs.size());
  for (const PreferencePair& pair : pairs) {
    const double m = margin_with(ev, pair, variant);
    report.margins.push_back(m);
    if (m > 0.0) ++report.wins;
  }
  report.win_rate = static_cast<double>(report.wins) / static_cast<double>(report.num_pairs);
  return report;
}

std::string EvalReport::to_json() const {
  const nlohmann::ordered_json doc = {{"variant", std::string(prefopt::to_string(variant))},
                                      {"win_rate", win_rate},
                                      {"wins", wins},
                                      {"num_pairs", num_pairs},
                                      {"margins", margins}};
  return doc.dump();
}

double gauss_legendre_unit(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss<double, 64>::integrate(f, 0.0, 1.0);
}

McQuadratureResult mc_vs_quadrature(double x, double y, std::size_t n_samples,
                                    std::uint64_t seed) {
  if (n_samples < 100) {
    throw Error(ErrorCode::kInvalidInput, "mc_vs_quadrature needs at least 100 samples");
  }
  auto integrand = [x, y](double delta) { return -log_sigmoid(x - delta * y); };
  Rng rng(seed);
  // Welford running moments.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double v = integrand(rng.uniform01());
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  const double variance = m2 / static_cast<double>(n_samples - 1);
  McQuadratureResult out;
  out.mc_estimate = mean;
  out.std_err = std::sqrt(variance / static_cast<double>(n_samples));
  out.quadrature_value = gauss_legendre_unit(integrand);
  return out;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  if (a.vocab_size() != b.vocab_size()) {
    throw Error(ErrorCode::kInvalidInput, "relative_error on mismatched shapes");
  }
  double diff = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) diff = std::max(diff, std::abs(av[i] - bv[i]));
  const double scale = std::max(a.max_abs(), b.max_abs());
  return scale < floor ? diff : diff / scale;
}

}  // namespace prefopt
