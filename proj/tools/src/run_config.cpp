#include "prefopt/app/run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/numerics.hpp"

namespace prefopt::app {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTrainNoiseStream = 0x746e6f697365ULL;
constexpr std::uint64_t kEvalNoiseStream = 0x656e6f697365ULL;
constexpr std::uint64_t kReferenceStream = 0x726566ULL;

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, "config key \"" + key + "\": " + what);
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad_key(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t as_size(const json& v, const std::string& key) {
  return static_cast<std::size_t>(as_u64(v, key));
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

template <typename F>
auto wrap(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidConfig && std::string(e.what()).rfind("config key", 0) == 0) {
      throw;
    }
    bad_key(key, e.what());
  }
}

ReferenceInit parse_reference_init(const std::string& name) {
  if (name == "uniform") return ReferenceInit::kUniform;
  if (name == "random") return ReferenceInit::kRandom;
  throw Error(ErrorCode::kInvalidConfig, "expected \"uniform\" or \"random\", got \"" + name + "\"");
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"label", [](RunConfig& c, const json& v, const std::string& k) { c.label = as_string(v, k); }},
      {"out_dir", [](RunConfig& c, const json& v, const std::string& k) { c.out_dir = as_string(v, k); }},
      {"dataset", [](RunConfig& c, const json& v, const std::string& k) { c.dataset = as_string(v, k); }},
      {"eval_dataset",
       [](RunConfig& c, const json& v, const std::string& k) { c.eval_dataset = as_string(v, k); }},
      {"eval_fraction",
       [](RunConfig& c, const json& v, const std::string& k) { c.eval_fraction = as_real(v, k); }},
      {"aspect_weights",
       [](RunConfig& c, const json& v, const std::string& k) {
         if (!v.is_array() || v.size() != kNumAspects) bad_key(k, "expected an array of 5 numbers");
         std::array<double, kNumAspects> w{};
         for (std::size_t i = 0; i < kNumAspects; ++i) w[i] = as_real(v[i], k);
         c.aspect_weights = AspectWeights::from_values(w);
       }},
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.seed = as_u64(v, k); }},
      {"generator_seed",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator_seed = as_u64(v, k); }},
      {"vocab_size",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator.vocab_size = as_size(v, k); }},
      {"num_pairs",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator.num_pairs = as_size(v, k); }},
      {"prompt_length",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator.prompt_length = as_size(v, k); }},
      {"response_min_length",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.generator.response_min_length = as_size(v, k);
       }},
      {"response_max_length",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.generator.response_max_length = as_size(v, k);
       }},
      {"separator_probability",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.generator.separator_probability = as_real(v, k);
       }},
      {"quality_gap",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator.quality_gap = as_real(v, k); }},
      {"quality_scale",
       [](RunConfig& c, const json& v, const std::string& k) { c.generator.quality_scale = as_real(v, k); }},
      {"score_sharpness",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.generator.score_sharpness = as_real(v, k);
       }},
      {"variant",
       [](RunConfig& c, const json& v, const std::string& k) {
         const std::string name = as_string(v, k);
         c.train.loss.variant = wrap(k, [&] { return parse_variant(name); });
       }},
      {"beta", [](RunConfig& c, const json& v, const std::string& k) { c.train.loss.beta = as_real(v, k); }},
      {"epsilon",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.loss.epsilon = as_real(v, k); }},
      {"gamma", [](RunConfig& c, const json& v, const std::string& k) { c.train.loss.gamma = as_real(v, k); }},
      {"learning_rate",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.learning_rate = as_real(v, k); }},
      {"batch_size",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.batch_size = as_size(v, k); }},
      {"iterations",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.iterations = as_size(v, k); }},
      {"eval_every",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.eval_every = as_size(v, k); }},
      {"train_noise",
       [](RunConfig& c, const json& v, const std::string& k) {
         const std::string name = as_string(v, k);
         c.train.train_noise.kind = wrap(k, [&] { return parse_noise_kind(name); });
       }},
      {"train_noise_gamma",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.train_noise.gamma = as_real(v, k); }},
      {"train_noise_seed",
       [](RunConfig& c, const json& v, const std::string& k) { c.train_noise_seed = as_u64(v, k); }},
      {"eval_noise",
       [](RunConfig& c, const json& v, const std::string& k) {
         const std::string name = as_string(v, k);
         c.train.eval_noise.kind = wrap(k, [&] { return parse_noise_kind(name); });
       }},
      {"eval_noise_gamma",
       [](RunConfig& c, const json& v, const std::string& k) { c.train.eval_noise.gamma = as_real(v, k); }},
      {"eval_noise_seed",
       [](RunConfig& c, const json& v, const std::string& k) { c.eval_noise_seed = as_u64(v, k); }},
      {"reference_init",
       [](RunConfig& c, const json& v, const std::string& k) {
         const std::string name = as_string(v, k);
         c.reference_init = wrap(k, [&] { return parse_reference_init(name); });
       }},
      {"reference_seed",
       [](RunConfig& c, const json& v, const std::string& k) { c.reference_seed = as_u64(v, k); }},
      {"reference_scale",
       [](RunConfig& c, const json& v, const std::string& k) { c.reference_scale = as_real(v, k); }},
  };
  return table;
}

}  // namespace

std::uint64_t default_train_noise_seed(std::uint64_t seed) {
  return derive_seed(seed, kTrainNoiseStream);
}

std::uint64_t default_eval_noise_seed(std::uint64_t seed) {
  return derive_seed(seed, kEvalNoiseStream);
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g = generator;
  g.seed = generator_seed.value_or(seed);
  return g;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.train_noise.seed = train_noise_seed.value_or(default_train_noise_seed(seed));
  t.eval_noise.seed = eval_noise_seed.value_or(default_eval_noise_seed(seed));
  return t;
}

ReferenceSpec RunConfig::reference_spec() const {
  ReferenceSpec spec;
  spec.init = reference_init;
  spec.seed = reference_seed.value_or(derive_seed(seed, kReferenceStream));
  spec.scale = reference_scale;
  return spec;
}

void RunConfig::validate() const {
  generator_config().validate();
  train_config().validate();
  aspect_weights.validate();
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "eval_fraction must lie in (0, 1)");
  }
  if (!(reference_scale > 0.0) || !std::isfinite(reference_scale)) {
    throw Error(ErrorCode::kInvalidConfig, "reference_scale must be positive and finite");
  }
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  RunConfig config;
  const auto& table = setters();
  for (const auto& [key, value] : doc.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw Error(ErrorCode::kInvalidConfig, "unknown config key \"" + key + "\"");
    it->second(config, value, key);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string run_config_to_json(const RunConfig& config) {
  const GeneratorConfig g = config.generator_config();
  const TrainConfig t = config.train_config();
  const ReferenceSpec r = config.reference_spec();
  nlohmann::ordered_json doc;
  doc["label"] = config.label;
  doc["out_dir"] = config.out_dir.string();
  if (config.dataset) doc["dataset"] = config.dataset->string();
  if (config.eval_dataset) doc["eval_dataset"] = config.eval_dataset->string();
  doc["eval_fraction"] = config.eval_fraction;
  const auto w = config.aspect_weights.values();
  doc["aspect_weights"] = std::vector<double>(w.begin(), w.end());
  doc["seed"] = config.seed;
  doc["generator_seed"] = g.seed;
  doc["vocab_size"] = g.vocab_size;
  doc["num_pairs"] = g.num_pairs;
  doc["prompt_length"] = g.prompt_length;
  doc["response_min_length"] = g.response_min_length;
  doc["response_max_length"] = g.response_max_length;
  doc["separator_probability"] = g.separator_probability;
  doc["quality_gap"] = g.quality_gap;
  doc["quality_scale"] = g.quality_scale;
  doc["score_sharpness"] = g.score_sharpness;
  doc["variant"] = std::string(to_string(t.loss.variant));
  doc["beta"] = t.loss.beta;
  doc["epsilon"] = t.loss.epsilon;
  doc["gamma"] = t.loss.gamma;
  doc["learning_rate"] = t.learning_rate;
  doc["batch_size"] = t.batch_size;
  doc["iterations"] = t.iterations;
  doc["eval_every"] = t.eval_every;
  doc["train_noise"] = std::string(to_string(t.train_noise.kind));
  doc["train_noise_gamma"] = t.train_noise.gamma;
  doc["train_noise_seed"] = t.train_noise.seed;
  doc["eval_noise"] = std::string(to_string(t.eval_noise.kind));
  doc["eval_noise_gamma"] = t.eval_noise.gamma;
  doc["eval_noise_seed"] = t.eval_noise.seed;
  doc["reference_init"] = r.init == ReferenceInit::kUniform ? "uniform" : "random";
  doc["reference_seed"] = r.seed;
  doc["reference_scale"] = r.scale;
  return doc.dump(2);
}

}  // namespace prefopt::app
