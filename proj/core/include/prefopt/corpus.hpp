#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace prefopt {

using Token = std::uint32_t;

inline constexpr std::size_t kDefaultVocabSize = 32;
inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 4.0;

/// The highest id of a vocabulary is reserved as the segment separator.
constexpr Token separator_token(std::size_t vocab_size) {
  return static_cast<Token>(vocab_size - 1);
}

/// Contiguous token span [start, start + length) of a response and its score.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 1;
  std::optional<double> score;

  std::size_t end() const { return start + length; }
  bool operator==(const Segment&) const = default;
};

inline constexpr std::size_t kNumAspects = 5;

struct AspectScores {
  int completeness = 0;
  int clarity = 0;
  int correctness = 0;
  int safety = 0;
  int helpfulness = 0;

  std::array<int, kNumAspects> values() const {
    return {completeness, clarity, correctness, safety, helpfulness};
  }
  static AspectScores from_values(const std::array<int, kNumAspects>& v);
  void validate() const;
  bool operator==(const AspectScores&) const = default;
};

/// Convex weights over the five aspects.
struct AspectWeights {
  double completeness = 0.2;
  double clarity = 0.2;
  double correctness = 0.2;
  double safety = 0.2;
  double helpfulness = 0.2;

  std::array<double, kNumAspects> values() const {
    return {completeness, clarity, correctness, safety, helpfulness};
  }
  static AspectWeights from_values(const std::array<double, kNumAspects>& v);
  static AspectWeights uniform() { return {}; }
  /// Throws kInvalidWeights unless every weight is >= 0 and they sum to 1
  /// within 1e-9.
  void validate() const;
};

struct SegmentedResponse {
  std::vector<Token> tokens;
  std::vector<Segment> segments;

  bool scored() const;
  std::vector<double> scores() const;
  void validate() const;
  bool operator==(const SegmentedResponse&) const = default;
};

struct PreferencePair {
  std::vector<Token> prompt;
  SegmentedResponse winner;
  SegmentedResponse loser;

  /// Winner and loser exchanged; segments and scores travel with their
  /// response.
  PreferencePair swapped() const { return {prompt, loser, winner}; }
  bool scored() const { return winner.scored() && loser.scored(); }
  void validate(std::size_t vocab_size) const;
  bool operator==(const PreferencePair&) const = default;
};

struct Dataset {
  std::vector<PreferencePair> pairs;
  std::size_t vocab_size = kDefaultVocabSize;
  std::string provenance;
  std::vector<std::string> warnings;

  bool scored() const;
  void validate() const;
};

/// r = w^T r_aspects.
double combine_aspect_scores(const AspectScores& aspects,
                             const AspectWeights& weights);

/// Splits at separator tokens. A separator closes the segment it ends; a
/// trailing run without a separator forms the last segment. Scores are unset.
SegmentedResponse segment_response(std::span<const Token> tokens,
                                   std::size_t vocab_size);

/// Keeps the N = min(N_w, N_l) highest-scored winner segments and the N
/// lowest-scored loser segments. Ties go to the smaller original index and
/// the kept segments stay in positional order.
std::pair<SegmentedResponse, SegmentedResponse> select_segments(
    const SegmentedResponse& winner, const SegmentedResponse& loser);

PreferencePair select_segments(const PreferencePair& pair);

// ---- JSON Lines persistence ------------------------------------------------

/// Record schema, one pair per line:
///   {"prompt":[ints],
///    "chosen":  {"tokens":[ints],"segments":[[start,len],...],
///                "scores":[reals] | "aspect_scores":[[5 ints],...]},
///    "rejected":{...}}
/// Aspect vectors are combined with `weights` at load time. When both score
/// forms are present the direct scores win and a warning is recorded.
Dataset read_dataset(std::istream& in, std::size_t vocab_size,
                     const AspectWeights& weights = AspectWeights::uniform());
Dataset load_dataset(const std::filesystem::path& path, std::size_t vocab_size,
                     const AspectWeights& weights = AspectWeights::uniform());

void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace prefopt
