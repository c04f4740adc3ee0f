#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/numerics.hpp"
#include "prefopt/policy.hpp"

namespace prefopt {

enum class LossVariant {
  kDpo,
  kConservativeDpo,
  kRobustDpo,
  kDpo2D,
  kRobust2DFlip,
  kRobust2DSegment,
};

/// Canonical names: dpo, conservative_dpo, robust_dpo, dpo_2d,
/// robust_2d_flip, robust_2d_segment.
std::string_view to_string(LossVariant variant);
LossVariant parse_variant(std::string_view name);

/// True for the segment-scored variants.
bool is_two_dimensional(LossVariant variant);

struct LossConfig {
  LossVariant variant = LossVariant::kDpo;
  double beta = 0.1;
  /// Flip rate assumed by conservative_dpo / robust_dpo.
  double epsilon = 0.0;
  /// Flip rate assumed by robust_2d_flip.
  double gamma = 0.0;

  void validate() const;
};

/// One sigmoid argument of a loss. For the segment variants x = X_k and
/// y = Y_k; for the response-level variants x is the DPO margin and y = 0.
/// `margin` is the value fed to log-sigmoid (x - delta * y).
struct SegmentTerm {
  double x = 0.0;
  double y = 0.0;
  double margin = 0.0;
};

struct LossReport {
  double value = 0.0;
  std::vector<SegmentTerm> per_segment;
  /// d value / d logits of the trainable policy.
  Gradient gradient;
};

/// sigma(beta * h).
double btl_preference_prob(double h, double beta);

/// beta * [sum of winner log-ratios - sum of loser log-ratios] over the full
/// responses.
double dpo_margin(const PolicyParams& params, const ReferencePolicy& ref,
                  const PreferencePair& pair, double beta);

/// -log sigma(dpo_margin).
LossReport dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                    const PreferencePair& pair, double beta);

/// (1 - eps) L(w, l) + eps L(l, w).
LossReport conservative_dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                                 const PreferencePair& pair, double beta, double epsilon);

/// [(1 - eps) L(w, l) - eps L(l, w)] / (1 - 2 eps). Its expectation under
/// flips with rate eps equals the clean loss exactly; the value itself can be
/// negative.
LossReport robust_dpo_loss(const PolicyParams& params, const ReferencePolicy& ref,
                           const PreferencePair& pair, double beta, double epsilon);

/// sigma(beta h)^(1 - eps) / sigma(-beta h)^eps. Diagnostic only: its logit
/// does not reduce to beta * h when eps > 0.
double corrected_preference_prob(double h, double beta, double epsilon);

/// (X_k, Y_k) with X_k = r_wk l_wk - r_lk l_lk and Y_k = l_wk + l_lk, where
/// l is the segment log-ratio. Both responses must carry the same number of
/// scored segments (see select_segments).
std::vector<SegmentTerm> segment_terms(const PolicyParams& params, const ReferencePolicy& ref,
                                       const PreferencePair& pair, double beta);

/// -sum_k log sigma(X_k).
LossReport group_loss_2d(const PolicyParams& params, const ReferencePolicy& ref,
                         const PreferencePair& pair, double beta);

/// -sum_k log sigma(X_k - delta Y_k), one delta in [0, 1] for the whole pair.
LossReport noisy_group_loss_2d(const PolicyParams& params, const ReferencePolicy& ref,
                               const PreferencePair& pair, double beta, double delta);

/// [(1 - gamma) L_group(w, l) - gamma L_group(l, w)] / (1 - 2 gamma).
LossReport robust_group_loss_flip(const PolicyParams& params, const ReferencePolicy& ref,
                                  const PreferencePair& pair, double beta, double gamma);

/// Batch mean of the configured per-pair loss and of its gradient. For
/// robust_2d_segment one delta ~ U[0, 1) is drawn from `rng` per pair, in
/// batch order.
LossReport loss_and_grad(const LossConfig& config, const PolicyParams& params,
                         const ReferencePolicy& ref, std::span<const PreferencePair> batch,
                         Rng& rng);

/// Same as loss_and_grad with the per-pair deltas supplied explicitly
/// (ignored by every variant except robust_2d_segment).
LossReport loss_and_grad(const LossConfig& config, const PolicyParams& params,
                         const ReferencePolicy& ref, std::span<const PreferencePair> batch,
                         std::span<const double> deltas);

/// Whether log sigma(x) and log sigma(-x) agree to 1e-12. Holds only at x = 0
/// up to that tolerance, since their difference is exactly x.
bool lemma_sigmoid_symmetry_check(double x);

namespace fault {
/// Test hook for the verification canary: when set, robust_dpo_loss
/// multiplies by (1 - 2 eps) instead of dividing.
void set_invert_robust_denominator(bool enabled);
bool invert_robust_denominator();
}  // namespace fault

}  // namespace prefopt
