#include "prefopt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prefopt/errors.hpp"

namespace prefopt {

void Matrix::add_scaled(const Matrix& other, double scale) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Matrix::scale(double factor) {
  for (double& v : data_) v *= factor;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::max_abs() const {
  double peak = 0.0;
  for (double v : data_) peak = std::max(peak, std::abs(v));
  return peak;
}

PolicyParams PolicyParams::random(std::size_t vocab_size, std::uint64_t seed, double scale) {
  Rng rng(seed);
  PolicyParams out = uniform(vocab_size);
  for (double& v : out.logits.values()) v = scale * rng.normal();
  return out;
}

ReferencePolicy::ReferencePolicy(Matrix logits) : logits_(std::move(logits)) {
  if (!logits_.all_finite()) {
    throw Error(ErrorCode::kInvalidConfig, "reference logits must be finite");
  }
}

void check_token(Token token, std::size_t vocab_size) {
  if (token >= vocab_size) {
    throw Error(ErrorCode::kIndex, "token " + std::to_string(token) +
                                       " outside vocabulary of size " +
                                       std::to_string(vocab_size));
  }
}

double log_prob(const Matrix& logits, Token prev, Token next) {
  check_token(prev, logits.vocab_size());
  check_token(next, logits.vocab_size());
  return logits(prev, next) - logsumexp(logits.row(prev));
}

Gradient log_prob_grad(const PolicyParams& params, Token prev, Token next) {
  check_token(prev, params.vocab_size());
  check_token(next, params.vocab_size());
  Gradient grad(params.vocab_size());
  const auto row = params.logits.row(prev);
  const double norm = logsumexp(row);
  auto out = grad.values.row(prev);
  for (std::size_t a = 0; a < row.size(); ++a) out[a] = -std::exp(row[a] - norm);
  out[next] += 1.0;
  return grad;
}

double segment_log_ratio(const PolicyParams& params, const ReferencePolicy& ref,
                         Token context, std::span<const Token> response,
                         const Segment& segment, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "beta must be positive");
  if (segment.length == 0 || segment.end() > response.size()) {
    throw Error(ErrorCode::kIndex, "segment outside the response token range");
  }
  double total = 0.0;
  for (std::size_t t = segment.start; t < segment.end(); ++t) {
    const Token prev = context_token(context, response, t);
    total += log_prob(params, prev, response[t]) - log_prob(ref, prev, response[t]);
  }
  return beta * total;
}

std::vector<Token> sample_response(const PolicyParams& params,
                                   std::span<const Token> prompt,
                                   std::size_t max_len, Rng& rng) {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidInput, "sampling needs a non-empty prompt");
  const LogProbTable table(params.logits);
  const std::size_t vocab = params.vocab_size();
  std::vector<Token> out;
  out.reserve(max_len);
  Token prev = prompt.back();
  check_token(prev, vocab);
  for (std::size_t i = 0; i < max_len; ++i) {
    const double u = rng.uniform01();
    double cumulative = 0.0;
    Token next = static_cast<Token>(vocab - 1);
    for (std::size_t a = 0; a < vocab; ++a) {
      cumulative += table.prob(prev, static_cast<Token>(a));
      if (u < cumulative) {
        next = static_cast<Token>(a);
        break;
      }
    }
    // Rounding can leave the cumulative sum a hair under 1; fall back to the
    // last token with non-zero mass.
    if (u >= cumulative) {
      for (std::size_t a = vocab; a-- > 0;) {
        if (table.prob(prev, static_cast<Token>(a)) > 0.0) {
          next = static_cast<Token>(a);
          break;
        }
      }
    }
    out.push_back(next);
    prev = next;
  }
  return out;
}

LogProbTable::LogProbTable(const Matrix& logits)
    : log_probs_(logits.vocab_size()), probs_(logits.vocab_size()) {
  for (std::size_t s = 0; s < logits.vocab_size(); ++s) {
    const auto row = logits.row(s);
    const double norm = logsumexp(row);
    auto lp = log_probs_.row(s);
    auto p = probs_.row(s);
    for (std::size_t a = 0; a < row.size(); ++a) {
      lp[a] = row[a] - norm;
      p[a] = std::exp(lp[a]);
    }
  }
}

Gradient GradientAccumulator::finish(const LogProbTable& table) const {
  const std::size_t vocab = counts_.vocab_size();
  Gradient grad(counts_);
  for (std::size_t s = 0; s < vocab; ++s) {
    const double w = row_weight_[s];
    if (w == 0.0) continue;
    auto row = grad.values.row(s);
    for (std::size_t a = 0; a < vocab; ++a) {
      row[a] -= w * table.prob(static_cast<Token>(s), static_cast<Token>(a));
    }
  }
  return grad;
}

ReferencePolicy ReferenceSpec::build(std::size_t vocab_size) const {
  if (init == ReferenceInit::kUniform) return ReferencePolicy::uniform(vocab_size);
  return ReferencePolicy(PolicyParams::random(vocab_size, seed, scale).logits);
}

namespace {

using nlohmann::json;
constexpr const char* kCheckpointFormat = "prefopt.policy.v1";

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  const CheckpointHeader& h = checkpoint.header;
  json reference = {{"init", h.reference.init == ReferenceInit::kUniform ? "uniform" : "random"}};
  if (h.reference.init == ReferenceInit::kRandom) {
    reference["seed"] = h.reference.seed;
    reference["scale"] = h.reference.scale;
  }
  json rows = json::array();
  const Matrix& m = checkpoint.params.logits;
  for (std::size_t s = 0; s < m.vocab_size(); ++s) {
    const auto r = m.row(s);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json doc = {{"format", kCheckpointFormat},
              {"vocab_size", h.vocab_size},
              {"seed", h.seed},
              {"beta", h.beta},
              {"variant", h.variant},
              {"reference", std::move(reference)},
              {"logits", std::move(rows)}};
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorCode::kParse, "unsupported checkpoint format");
    }
    Checkpoint cp;
    CheckpointHeader& h = cp.header;
    h.vocab_size = doc.at("vocab_size").get<std::size_t>();
    h.seed = doc.at("seed").get<std::uint64_t>();
    h.beta = doc.at("beta").get<double>();
    h.variant = doc.at("variant").get<std::string>();
    const json& ref = doc.at("reference");
    const std::string init = ref.at("init").get<std::string>();
    if (init == "uniform") {
      h.reference.init = ReferenceInit::kUniform;
    } else if (init == "random") {
      h.reference.init = ReferenceInit::kRandom;
      h.reference.seed = ref.at("seed").get<std::uint64_t>();
      h.reference.scale = ref.at("scale").get<double>();
    } else {
      throw Error(ErrorCode::kParse, "unknown reference init \"" + init + "\"");
    }
    const json& rows = doc.at("logits");
    if (!rows.is_array() || rows.size() != h.vocab_size) {
      throw Error(ErrorCode::kValidation, "checkpoint logits do not match vocab_size");
    }
    cp.params = PolicyParams::uniform(h.vocab_size);
    for (std::size_t s = 0; s < h.vocab_size; ++s) {
      const auto row = rows[s].get<std::vector<double>>();
      if (row.size() != h.vocab_size) {
        throw Error(ErrorCode::kValidation, "checkpoint logits do not match vocab_size");
      }
      std::copy(row.begin(), row.end(), cp.params.logits.row(s).begin());
    }
    if (!cp.params.logits.all_finite()) {
      throw Error(ErrorCode::kValidation, "checkpoint logits must be finite");
    }
    return cp;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out << checkpoint_to_json(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace prefopt
