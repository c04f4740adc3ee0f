#pragma once

// Internal: shared log-probability tables for the loss and evaluation paths.

#include <span>
#include <string>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/errors.hpp"
#include "prefopt/policy.hpp"

namespace prefopt::detail {

// Log-probability tables of both policies, built once per call or batch.
class Evaluator {
 public:
  Evaluator(const PolicyParams& params, const ReferencePolicy& ref, double beta)
      : theta_(params.logits), ref_(ref.logits()), beta_(beta) {
    if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "beta must be positive");
    if (params.vocab_size() != ref.vocab_size()) {
      throw Error(ErrorCode::kInvalidConfig, "policy and reference vocabularies differ");
    }
  }

  std::size_t vocab_size() const { return theta_.vocab_size(); }
  double beta() const { return beta_; }
  const LogProbTable& theta() const { return theta_; }

  /// beta * sum of log-ratios over response tokens [begin, end).
  double span_ratio(Token context, std::span<const Token> tokens, std::size_t begin,
                    std::size_t end) const {
    double total = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      const Token prev = context_token(context, tokens, t);
      total += theta_.log_prob(prev, tokens[t]) - ref_.log_prob(prev, tokens[t]);
    }
    return beta_ * total;
  }

  /// Adds weight * d span_ratio / d logits.
  void span_grad(GradientAccumulator& acc, Token context, std::span<const Token> tokens,
                 std::size_t begin, std::size_t end, double weight) const {
    if (weight == 0.0) return;
    for (std::size_t t = begin; t < end; ++t) {
      acc.add(context_token(context, tokens, t), tokens[t], weight * beta_);
    }
  }

 private:
  LogProbTable theta_;
  LogProbTable ref_;
  double beta_;
};

inline double response_margin(const Evaluator& ev, const PreferencePair& pair) {
  const Token ctx = pair.prompt.back();
  return ev.span_ratio(ctx, pair.winner.tokens, 0, pair.winner.tokens.size()) -
         ev.span_ratio(ctx, pair.loser.tokens, 0, pair.loser.tokens.size());
}

inline void response_margin_grad(const Evaluator& ev, const PreferencePair& pair,
                          GradientAccumulator& acc, double weight) {
  const Token ctx = pair.prompt.back();
  ev.span_grad(acc, ctx, pair.winner.tokens, 0, pair.winner.tokens.size(), weight);
  ev.span_grad(acc, ctx, pair.loser.tokens, 0, pair.loser.tokens.size(), -weight);
}

inline void check_segment_pair(const PreferencePair& pair) {
  if (!pair.scored()) {
    throw Error(ErrorCode::kMissingScores, "segment losses need scored segments");
  }
  if (pair.winner.segments.size() != pair.loser.segments.size()) {
    throw Error(ErrorCode::kInvalidPair,
                "winner has " + std::to_string(pair.winner.segments.size()) +
                    " segments but loser has " + std::to_string(pair.loser.segments.size()) +
                    "; run select_segments first");
  }
}

struct SegmentRatios {
  double winner;
  double loser;
  double winner_score;
  double loser_score;
};

inline std::vector<SegmentRatios> segment_ratios(const Evaluator& ev, const PreferencePair& pair) {
  check_segment_pair(pair);
  const Token ctx = pair.prompt.back();
  std::vector<SegmentRatios> out;
  out.reserve(pair.winner.segments.size());
  for (std::size_t k = 0; k < pair.winner.segments.size(); ++k) {
    const Segment& w = pair.winner.segments[k];
    const Segment& l = pair.loser.segments[k];
    out.push_back({ev.span_ratio(ctx, pair.winner.tokens, w.start, w.end()),
                   ev.span_ratio(ctx, pair.loser.tokens, l.start, l.end()), *w.score,
                   *l.score});
  }
  return out;
}

}  // namespace prefopt::detail
