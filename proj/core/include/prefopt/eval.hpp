#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/policy.hpp"

namespace prefopt {

/// Implicit reward margin of a pair. Response-level variants use dpo_margin;
/// segment variants use sum_k X_k with the pair's current (possibly noisy)
/// scores.
double pair_margin(const PolicyParams& params, const ReferencePolicy& ref,
                   const PreferencePair& pair, LossVariant variant, double beta);

struct EvalReport {
  double win_rate = 0.0;
  std::size_t num_pairs = 0;
  std::size_t wins = 0;
  std::vector<double> margins;
  LossVariant variant = LossVariant::kDpo;

  /// {"variant":..,"win_rate":..,"wins":..,"num_pairs":..,"margins":[..]}
  std::string to_json() const;
};

/// Fraction of pairs with margin strictly above zero.
EvalReport win_rate(const PolicyParams& params, const ReferencePolicy& ref,
                    std::span<const PreferencePair> pairs, LossVariant variant, double beta);

// ---- Expectation over the segment perturbation -----------------------------

/// 64-point Gauss-Legendre rule on [0, 1].
double gauss_legendre_unit(const std::function<double(double)>& f);

struct McQuadratureResult {
  double mc_estimate = 0.0;
  double quadrature_value = 0.0;
  double std_err = 0.0;
};

/// E_{delta ~ U(0,1)}[-log sigma(x - delta y)] by Monte Carlo (with its
/// standard error) and by quadrature.
McQuadratureResult mc_vs_quadrature(double x, double y, std::size_t n_samples,
                                    std::uint64_t seed);

// ---- Property suite --------------------------------------------------------

struct PropertyResult {
  std::string name;
  bool passed = false;
  /// Worst observed error (or the observed statistic for one-sided checks).
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct PropertyReport {
  std::uint64_t seed = 0;
  std::vector<PropertyResult> results;

  bool all_passed() const;
  std::string to_json() const;
  std::string to_text() const;
};

/// Runs every identity and invariant check of the library on random
/// instances drawn from `seed`. Failures are entries, never exceptions.
PropertyReport run_property_suite(std::uint64_t seed);

// ---- Random instances ------------------------------------------------------

struct InstanceShape {
  std::size_t vocab_size = 8;
  std::size_t prompt_length = 3;
  std::size_t min_length = 2;
  std::size_t max_length = 9;
  /// Force a single segment per response.
  bool single_segment = false;
  /// Give every segment score 1.
  bool unit_scores = false;
};

/// Random scored pair; winner and loser carry the same number of segments.
PreferencePair random_pair(Rng& rng, const InstanceShape& shape);

/// Max-norm relative error ||a - b||_inf / max(||a||_inf, ||b||_inf), or the
/// absolute error when both are below `floor`.
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12);

}  // namespace prefopt
