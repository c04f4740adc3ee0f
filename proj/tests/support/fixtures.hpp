#pragma once

#include <initializer_list>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/numerics.hpp"
#include "prefopt/policy.hpp"

namespace fixtures {

using prefopt::PreferencePair;
using prefopt::Segment;
using prefopt::SegmentedResponse;
using prefopt::Token;

/// Response whose segments have the given lengths and scores, tiling the
/// tokens in order.
inline SegmentedResponse response(std::vector<Token> tokens, std::initializer_list<std::size_t> lengths,
                                  std::initializer_list<double> scores) {
  SegmentedResponse r;
  r.tokens = std::move(tokens);
  std::size_t start = 0;
  auto s = scores.begin();
  for (std::size_t len : lengths) {
    r.segments.push_back({start, len, s == scores.end() ? std::optional<double>{} : std::optional<double>{*s++}});
    start += len;
  }
  return r;
}

inline PreferencePair pair(std::vector<Token> prompt, SegmentedResponse winner, SegmentedResponse loser) {
  return {std::move(prompt), std::move(winner), std::move(loser)};
}

/// Random logits with entries N(0, scale^2).
inline prefopt::PolicyParams random_params(std::size_t vocab, std::uint64_t seed, double scale = 1.0) {
  return prefopt::PolicyParams::random(vocab, seed, scale);
}

inline prefopt::ReferencePolicy random_ref(std::size_t vocab, std::uint64_t seed, double scale = 0.5) {
  return prefopt::ReferencePolicy(prefopt::PolicyParams::random(vocab, seed, scale).logits);
}

}  // namespace fixtures
