#include "prefopt/synthetic.hpp"

#include <cmath>
#include <string>

#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

constexpr std::uint64_t kWorldStream = 0x776f726c64ULL;
constexpr std::uint64_t kSampleStream = 0x73616d706c65ULL;

// Pins the separator column so that P(separator | prev) = p in every row.
void pin_separator(Matrix& logits, double p) {
  const std::size_t vocab = logits.vocab_size();
  const Token sep = separator_token(vocab);
  for (std::size_t s = 0; s < vocab; ++s) {
    auto row = logits.row(s);
    const double rest = logsumexp(row.subspan(0, vocab - 1));
    row[sep] = rest + std::log(p / (1.0 - p));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (vocab_size < 3) fail("vocab_size must be at least 3");
  if (num_pairs < 1) fail("num_pairs must be at least 1");
  if (prompt_length < 1) fail("prompt_length must be at least 1");
  if (response_min_length < 1) fail("response_min_length must be at least 1");
  if (response_max_length < response_min_length) {
    fail("response_max_length must be >= response_min_length");
  }
  if (!(separator_probability > 0.0 && separator_probability < 1.0)) {
    fail("separator_probability must lie in (0, 1)");
  }
  if (!(quality_gap >= 0.0) || !std::isfinite(quality_gap)) {
    fail("quality_gap must be finite and >= 0");
  }
  if (!(quality_scale > 0.0) || !std::isfinite(quality_scale)) {
    fail("quality_scale must be positive and finite");
  }
  if (!(score_sharpness > 0.0) || !std::isfinite(score_sharpness)) {
    fail("score_sharpness must be positive and finite");
  }
}

PlantedWorld::PlantedWorld(const GeneratorConfig& config)
    : good_(PolicyParams::uniform(config.vocab_size)),
      bad_(PolicyParams::uniform(config.vocab_size)),
      quality_(config.vocab_size),
      sharpness_(config.score_sharpness) {
  config.validate();
  const std::size_t vocab = config.vocab_size;
  const Token sep = separator_token(vocab);
  Rng rng(derive_seed(config.seed, kWorldStream));
  Matrix base(vocab);
  for (double& v : base.values()) v = rng.normal();
  for (std::size_t s = 0; s < vocab; ++s) {
    for (std::size_t a = 0; a < vocab; ++a) quality_(s, a) = a == sep ? 0.0 : rng.normal();
  }
  const double half_gap = 0.5 * config.quality_gap * config.quality_scale;
  good_.logits = base;
  good_.logits.add_scaled(quality_, half_gap);
  bad_.logits = base;
  bad_.logits.add_scaled(quality_, -half_gap);
  pin_separator(good_.logits, config.separator_probability);
  pin_separator(bad_.logits, config.separator_probability);
}

double PlantedWorld::score_segment(Token context, std::span<const Token> response,
                                   const Segment& segment) const {
  double total = 0.0;
  for (std::size_t t = segment.start; t < segment.end(); ++t) {
    total += quality_(context_token(context, response, t), response[t]);
  }
  const double mean = total / static_cast<double>(segment.length);
  return kMaxScore * sigmoid(sharpness_ * mean);
}

double PlantedWorld::score_response(Token context, const SegmentedResponse& response) const {
  double total = 0.0;
  for (const Segment& seg : response.segments) {
    total += score_segment(context, response.tokens, seg);
  }
  return total / static_cast<double>(response.segments.size());
}

bool PlantedWorld::prefers_winner(const PreferencePair& pair) const {
  const Token context = pair.prompt.back();
  return score_response(context, pair.winner) > score_response(context, pair.loser);
}

Dataset generate_synthetic(const GeneratorConfig& config) {
  config.validate();
  const PlantedWorld world(config);
  const std::size_t vocab = config.vocab_size;
  Rng rng(derive_seed(config.seed, kSampleStream));

  Dataset dataset;
  dataset.vocab_size = vocab;
  dataset.provenance = "synthetic: seed=" + std::to_string(config.seed) +
                       " pairs=" + std::to_string(config.num_pairs) +
                       " quality_gap=" + std::to_string(config.quality_gap);
  dataset.pairs.reserve(config.num_pairs);

  const std::uint64_t length_span = config.response_max_length - config.response_min_length + 1;
  auto draw_response = [&](const PolicyParams& source, const std::vector<Token>& prompt) {
    const std::size_t len = config.response_min_length + rng.uniform_index(length_span);
    SegmentedResponse response = segment_response(sample_response(source, prompt, len, rng), vocab);
    for (Segment& seg : response.segments) {
      seg.score = world.score_segment(prompt.back(), response.tokens, seg);
    }
    return response;
  };

  for (std::size_t i = 0; i < config.num_pairs; ++i) {
    PreferencePair pair;
    pair.prompt.resize(config.prompt_length);
    for (Token& t : pair.prompt) t = static_cast<Token>(rng.uniform_index(vocab - 1));
    pair.winner = draw_response(world.good(), pair.prompt);
    pair.loser = draw_response(world.bad(), pair.prompt);
    dataset.pairs.push_back(std::move(pair));
  }
  return dataset;
}

double planted_oracle_win_rate(const PlantedWorld& world, const Dataset& dataset) {
  if (dataset.pairs.empty()) throw Error(ErrorCode::kInvalidInput, "empty dataset");
  std::size_t wins = 0;
  for (const PreferencePair& pair : dataset.pairs) wins += world.prefers_winner(pair) ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(dataset.pairs.size());
}

}  // namespace prefopt
