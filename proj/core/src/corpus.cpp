#include "prefopt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

std::vector<std::size_t> ranked_indices(const SegmentedResponse& response,
                                        bool highest_first) {
  std::vector<std::size_t> order(response.segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = *response.segments[a].score;
    const double sb = *response.segments[b].score;
    return highest_first ? sa > sb : sa < sb;
  });
  return order;
}

SegmentedResponse keep_segments(const SegmentedResponse& response,
                                std::vector<std::size_t> kept) {
  std::sort(kept.begin(), kept.end());
  SegmentedResponse out;
  out.tokens = response.tokens;
  out.segments.reserve(kept.size());
  for (std::size_t idx : kept) out.segments.push_back(response.segments[idx]);
  return out;
}

}  // namespace

AspectScores AspectScores::from_values(const std::array<int, kNumAspects>& v) {
  return {v[0], v[1], v[2], v[3], v[4]};
}

void AspectScores::validate() const {
  for (int v : values()) {
    if (v < 0 || v > 4) {
      throw Error(ErrorCode::kValidation,
                  "aspect score " + std::to_string(v) + " outside {0..4}");
    }
  }
}

AspectWeights AspectWeights::from_values(const std::array<double, kNumAspects>& v) {
  return {v[0], v[1], v[2], v[3], v[4]};
}

void AspectWeights::validate() const {
  double total = 0.0;
  for (double w : values()) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidWeights, "aspect weights must be finite and non-negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidWeights,
                "aspect weights must sum to 1 (got " + std::to_string(total) + ")");
  }
}

bool SegmentedResponse::scored() const {
  return std::all_of(segments.begin(), segments.end(),
                     [](const Segment& s) { return s.score.has_value(); });
}

std::vector<double> SegmentedResponse::scores() const {
  std::vector<double> out;
  out.reserve(segments.size());
  for (const Segment& s : segments) {
    if (!s.score) throw Error(ErrorCode::kMissingScores, "segment has no score");
    out.push_back(*s.score);
  }
  return out;
}

void SegmentedResponse::validate() const {
  if (tokens.empty()) throw Error(ErrorCode::kValidation, "response has no tokens");
  if (segments.empty()) throw Error(ErrorCode::kValidation, "response has no segments");
  std::size_t floor = 0;
  for (const Segment& s : segments) {
    if (s.length == 0) throw Error(ErrorCode::kValidation, "segment of length 0");
    if (s.start < floor) {
      throw Error(ErrorCode::kValidation, "segments overlap or are out of order");
    }
    if (s.end() > tokens.size()) {
      throw Error(ErrorCode::kValidation, "segment exceeds the response token range");
    }
    if (s.score && !std::isfinite(*s.score)) {
      throw Error(ErrorCode::kValidation, "segment score is not finite");
    }
    floor = s.end();
  }
}

void PreferencePair::validate(std::size_t vocab_size) const {
  if (prompt.empty()) throw Error(ErrorCode::kValidation, "pair has an empty prompt");
  winner.validate();
  loser.validate();
  auto check = [vocab_size](const std::vector<Token>& tokens) {
    for (Token t : tokens) {
      if (t >= vocab_size) {
        throw Error(ErrorCode::kValidation,
                    "token " + std::to_string(t) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
      }
    }
  };
  check(prompt);
  check(winner.tokens);
  check(loser.tokens);
}

bool Dataset::scored() const {
  return std::all_of(pairs.begin(), pairs.end(),
                     [](const PreferencePair& p) { return p.scored(); });
}

void Dataset::validate() const {
  if (vocab_size < 2) throw Error(ErrorCode::kValidation, "vocabulary needs at least 2 tokens");
  for (const PreferencePair& pair : pairs) pair.validate(vocab_size);
}

double combine_aspect_scores(const AspectScores& aspects,
                             const AspectWeights& weights) {
  weights.validate();
  const auto w = weights.values();
  const auto r = aspects.values();
  double total = 0.0;
  for (std::size_t i = 0; i < kNumAspects; ++i) total += w[i] * r[i];
  return total;
}

SegmentedResponse segment_response(std::span<const Token> tokens,
                                   std::size_t vocab_size) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "cannot segment an empty response");
  const Token sep = separator_token(vocab_size);
  SegmentedResponse out;
  out.tokens.assign(tokens.begin(), tokens.end());
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == sep) {
      out.segments.push_back({start, i + 1 - start, std::nullopt});
      start = i + 1;
    }
  }
  if (start < tokens.size()) {
    out.segments.push_back({start, tokens.size() - start, std::nullopt});
  }
  return out;
}

std::pair<SegmentedResponse, SegmentedResponse> select_segments(
    const SegmentedResponse& winner, const SegmentedResponse& loser) {
  if (!winner.scored() || !loser.scored()) {
    throw Error(ErrorCode::kMissingScores, "segment selection needs scored segments");
  }
  const std::size_t n = std::min(winner.segments.size(), loser.segments.size());
  auto top = ranked_indices(winner, /*highest_first=*/true);
  auto bottom = ranked_indices(loser, /*highest_first=*/false);
  top.resize(n);
  bottom.resize(n);
  return {keep_segments(winner, std::move(top)), keep_segments(loser, std::move(bottom))};
}

PreferencePair select_segments(const PreferencePair& pair) {
  auto [winner, loser] = select_segments(pair.winner, pair.loser);
  return {pair.prompt, std::move(winner), std::move(loser)};
}

}  // namespace prefopt
