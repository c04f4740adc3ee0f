#include <algorithm>

#include "prefopt/errors.hpp"
#include "prefopt/eval.hpp"

namespace prefopt {

namespace {

SegmentedResponse random_response(Rng& rng, const InstanceShape& shape, std::size_t segments) {
  // Lay out `segments` non-empty segments that tile a random-length response.
  const std::size_t min_len = std::max(shape.min_length, segments);
  const std::size_t max_len = std::max(shape.max_length, min_len);
  const std::size_t length = min_len + rng.uniform_index(max_len - min_len + 1);
  std::vector<std::size_t> cuts;
  while (cuts.size() + 1 < segments) {
    const std::size_t c = 1 + rng.uniform_index(length - 1);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(length);

  SegmentedResponse response;
  response.tokens.resize(length);
  for (Token& t : response.tokens) t = static_cast<Token>(rng.uniform_index(shape.vocab_size));
  std::size_t start = 0;
  for (std::size_t end : cuts) {
    const double score = shape.unit_scores ? 1.0 : kMaxScore * rng.uniform01();
    response.segments.push_back({start, end - start, score});
    start = end;
  }
  return response;
}

}  // namespace

PreferencePair random_pair(Rng& rng, const InstanceShape& shape) {
  if (shape.vocab_size < 2 || shape.prompt_length < 1 || shape.min_length < 1) {
    throw Error(ErrorCode::kInvalidConfig, "degenerate instance shape");
  }
  const std::size_t segments =
      shape.single_segment ? 1 : 1 + rng.uniform_index(std::min<std::size_t>(3, shape.min_length));
  PreferencePair pair;
  pair.prompt.resize(shape.prompt_length);
  for (Token& t : pair.prompt) t = static_cast<Token>(rng.uniform_index(shape.vocab_size));
  pair.winner = random_response(rng, shape, segments);
  pair.loser = random_response(rng, shape, segments);
  return pair;
}

}  // namespace prefopt
