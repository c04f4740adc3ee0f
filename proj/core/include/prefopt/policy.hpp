#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prefopt/corpus.hpp"
#include "prefopt/numerics.hpp"

namespace prefopt {

/// Dense V x V table; entry (prev, next) scores token `next` after `prev`.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t vocab_size, double fill = 0.0)
      : vocab_(vocab_size), data_(vocab_size * vocab_size, fill) {}

  std::size_t vocab_size() const { return vocab_; }

  double& operator()(std::size_t prev, std::size_t next) { return data_[prev * vocab_ + next]; }
  double operator()(std::size_t prev, std::size_t next) const {
    return data_[prev * vocab_ + next];
  }

  std::span<double> row(std::size_t prev) { return {data_.data() + prev * vocab_, vocab_}; }
  std::span<const double> row(std::size_t prev) const {
    return {data_.data() + prev * vocab_, vocab_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// this += scale * other
  void add_scaled(const Matrix& other, double scale);
  void scale(double factor);
  bool all_finite() const;
  double max_abs() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t vocab_ = 0;
  std::vector<double> data_;
};

/// Trainable first-order table policy pi_theta(next | prev).
struct PolicyParams {
  Matrix logits;

  std::size_t vocab_size() const { return logits.vocab_size(); }
  static PolicyParams uniform(std::size_t vocab_size) { return {Matrix(vocab_size)}; }
  /// Independent N(0, scale^2) logits.
  static PolicyParams random(std::size_t vocab_size, std::uint64_t seed, double scale = 1.0);
  bool operator==(const PolicyParams&) const = default;
};

/// Frozen reference policy pi_ref; read-only after construction.
class ReferencePolicy {
 public:
  explicit ReferencePolicy(Matrix logits);
  static ReferencePolicy uniform(std::size_t vocab_size) { return ReferencePolicy(Matrix(vocab_size)); }

  const Matrix& logits() const { return logits_; }
  std::size_t vocab_size() const { return logits_.vocab_size(); }
  PolicyParams as_params() const { return {logits_}; }

 private:
  Matrix logits_;
};

/// d(quantity)/d(logits), same shape as the policy table.
struct Gradient {
  Matrix values;

  explicit Gradient(std::size_t vocab_size = 0) : values(vocab_size) {}
  explicit Gradient(Matrix m) : values(std::move(m)) {}
};

/// log pi(next | prev) = logits[prev, next] - logsumexp(logits[prev, :]).
double log_prob(const Matrix& logits, Token prev, Token next);
inline double log_prob(const PolicyParams& params, Token prev, Token next) {
  return log_prob(params.logits, prev, next);
}
inline double log_prob(const ReferencePolicy& ref, Token prev, Token next) {
  return log_prob(ref.logits(), prev, next);
}

/// Row `prev` holds indicator(a == next) - pi(a | prev); other rows are zero.
Gradient log_prob_grad(const PolicyParams& params, Token prev, Token next);

/// beta * sum over the segment's tokens of [log pi_theta - log pi_ref]. The
/// first response token is conditioned on `context` (the last prompt token).
double segment_log_ratio(const PolicyParams& params, const ReferencePolicy& ref,
                         Token context, std::span<const Token> response,
                         const Segment& segment, double beta);

/// Samples exactly `max_len` tokens autoregressively, starting after the last
/// prompt token.
std::vector<Token> sample_response(const PolicyParams& params,
                                   std::span<const Token> prompt,
                                   std::size_t max_len, Rng& rng);

/// Row-wise log-softmax of a table, computed once and shared by every token
/// lookup of a batch.
class LogProbTable {
 public:
  explicit LogProbTable(const Matrix& logits);

  std::size_t vocab_size() const { return log_probs_.vocab_size(); }
  double log_prob(Token prev, Token next) const { return log_probs_(prev, next); }
  double prob(Token prev, Token next) const { return probs_(prev, next); }

 private:
  Matrix log_probs_;
  Matrix probs_;
};

/// Collects sum_t w_t * d log pi(next_t | prev_t) / d logits lazily: token
/// weights are binned per (prev, next) and the softmax term is applied once
/// per row in finish().
class GradientAccumulator {
 public:
  explicit GradientAccumulator(std::size_t vocab_size)
      : counts_(vocab_size), row_weight_(vocab_size, 0.0) {}

  void add(Token prev, Token next, double weight) {
    counts_(prev, next) += weight;
    row_weight_[prev] += weight;
  }

  Gradient finish(const LogProbTable& table) const;

 private:
  Matrix counts_;
  std::vector<double> row_weight_;
};

void check_token(Token token, std::size_t vocab_size);

/// Token that conditions response position `index`.
inline Token context_token(Token prompt_last, std::span<const Token> response,
                           std::size_t index) {
  return index == 0 ? prompt_last : response[index - 1];
}

// ---- Checkpoints -----------------------------------------------------------

enum class ReferenceInit { kUniform, kRandom };

struct ReferenceSpec {
  ReferenceInit init = ReferenceInit::kUniform;
  std::uint64_t seed = 0;
  double scale = 1.0;

  ReferencePolicy build(std::size_t vocab_size) const;
};

struct CheckpointHeader {
  std::size_t vocab_size = kDefaultVocabSize;
  std::uint64_t seed = 0;
  double beta = 0.1;
  std::string variant;
  ReferenceSpec reference;
};

struct Checkpoint {
  CheckpointHeader header;
  PolicyParams params;
};

/// JSON document:
///   {"format":"prefopt.policy.v1","vocab_size":V,"seed":S,"beta":b,
///    "variant":"...","reference":{"init":"uniform"|"random","seed":..,"scale":..},
///    "logits":[[row 0], ..., [row V-1]]}
/// Doubles are written with round-trip precision.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prefopt
