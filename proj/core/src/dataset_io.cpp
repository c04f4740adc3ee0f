#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "prefopt/corpus.hpp"
#include "prefopt/errors.hpp"

namespace prefopt {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line,
                    const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(line, "missing field \"" + where + key + "\"");
  return *it;
}

std::vector<Token> parse_tokens(const json& node, std::size_t line,
                                const std::string& field) {
  if (!node.is_array()) parse_fail(line, "field \"" + field + "\" must be an array");
  std::vector<Token> out;
  out.reserve(node.size());
  for (const json& t : node) {
    if (!t.is_number_integer() || t.get<long long>() < 0) {
      parse_fail(line, "field \"" + field + "\" must hold non-negative integers");
    }
    out.push_back(static_cast<Token>(t.get<long long>()));
  }
  return out;
}

SegmentedResponse parse_response(const json& node, std::size_t line,
                                 const std::string& name,
                                 const AspectWeights& weights, Dataset& dataset) {
  if (!node.is_object()) parse_fail(line, "field \"" + name + "\" must be an object");
  const std::string prefix = name + ".";
  SegmentedResponse response;
  response.tokens = parse_tokens(require(node, "tokens", line, prefix), line, prefix + "tokens");

  const json& segs = require(node, "segments", line, prefix);
  if (!segs.is_array()) parse_fail(line, "field \"" + prefix + "segments\" must be an array");
  for (const json& s : segs) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
        !s[1].is_number_integer() || s[0].get<long long>() < 0 ||
        s[1].get<long long>() < 1) {
      parse_fail(line, "field \"" + prefix + "segments\" entries must be [start>=0, len>=1]");
    }
    response.segments.push_back(
        {static_cast<std::size_t>(s[0].get<long long>()),
         static_cast<std::size_t>(s[1].get<long long>()), std::nullopt});
  }

  const auto scores_it = node.find("scores");
  const auto aspects_it = node.find("aspect_scores");
  const bool has_scores = scores_it != node.end() && !scores_it->is_null();
  const bool has_aspects = aspects_it != node.end() && !aspects_it->is_null();
  if (!has_scores && !has_aspects) {
    parse_fail(line, "missing field \"" + prefix + "scores\" (or \"" + prefix +
                         "aspect_scores\")");
  }
  if (has_scores && has_aspects) {
    dataset.warnings.push_back("line " + std::to_string(line) + ": " + name +
                               " has both scores and aspect_scores; using scores");
  }

  std::vector<double> scores;
  if (has_scores) {
    if (!scores_it->is_array()) parse_fail(line, "field \"" + prefix + "scores\" must be an array");
    for (const json& v : *scores_it) {
      if (!v.is_number()) parse_fail(line, "field \"" + prefix + "scores\" must hold numbers");
      scores.push_back(v.get<double>());
    }
  } else {
    if (!aspects_it->is_array()) {
      parse_fail(line, "field \"" + prefix + "aspect_scores\" must be an array");
    }
    for (const json& v : *aspects_it) {
      if (!v.is_array() || v.size() != kNumAspects) {
        parse_fail(line, "field \"" + prefix + "aspect_scores\" entries must hold 5 integers");
      }
      std::array<int, kNumAspects> raw{};
      for (std::size_t i = 0; i < kNumAspects; ++i) {
        if (!v[i].is_number_integer()) {
          parse_fail(line, "field \"" + prefix + "aspect_scores\" entries must hold 5 integers");
        }
        raw[i] = v[i].get<int>();
      }
      const AspectScores aspects = AspectScores::from_values(raw);
      try {
        aspects.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::kValidation, "line " + std::to_string(line) + ": " + e.what());
      }
      scores.push_back(combine_aspect_scores(aspects, weights));
    }
  }
  if (scores.size() != response.segments.size()) {
    parse_fail(line, "\"" + name + "\" has " + std::to_string(response.segments.size()) +
                         " segments but " + std::to_string(scores.size()) + " scores");
  }
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!(scores[k] >= kMinScore && scores[k] <= kMaxScore)) {
      throw Error(ErrorCode::kValidation, "line " + std::to_string(line) + ": " + name +
                                              " score outside [0, 4]");
    }
    response.segments[k].score = scores[k];
  }
  return response;
}

json response_to_json(const SegmentedResponse& response) {
  json segs = json::array();
  for (const Segment& s : response.segments) segs.push_back({s.start, s.length});
  json out = {{"tokens", response.tokens}, {"segments", std::move(segs)}};
  if (response.scored()) out["scores"] = response.scores();
  return out;
}

}  // namespace

Dataset read_dataset(std::istream& in, std::size_t vocab_size,
                     const AspectWeights& weights) {
  weights.validate();
  Dataset dataset;
  dataset.vocab_size = vocab_size;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      parse_fail(line, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) parse_fail(line, "record must be a JSON object");
    PreferencePair pair;
    pair.prompt = parse_tokens(require(record, "prompt", line, ""), line, "prompt");
    pair.winner = parse_response(require(record, "chosen", line, ""), line, "chosen",
                                 weights, dataset);
    pair.loser = parse_response(require(record, "rejected", line, ""), line, "rejected",
                                weights, dataset);
    try {
      pair.validate(vocab_size);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what());
    }
    dataset.pairs.push_back(std::move(pair));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path, std::size_t vocab_size,
                     const AspectWeights& weights) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  Dataset dataset = read_dataset(in, vocab_size, weights);
  dataset.provenance = "loaded from " + path.string();
  return dataset;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const PreferencePair& pair : dataset.pairs) {
    json record = {{"prompt", pair.prompt},
                   {"chosen", response_to_json(pair.winner)},
                   {"rejected", response_to_json(pair.loser)}};
    out << record.dump() << '\n';
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write dataset " + path.string());
  write_dataset(dataset, out);
  if (!out) throw Error(ErrorCode::kIo, "failed while writing " + path.string());
}

}  // namespace prefopt
