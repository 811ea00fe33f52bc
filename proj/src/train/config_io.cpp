#include "vqmd/train/config_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vqmd/common/error.hpp"

namespace vqmd::train {

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

/// Rejects keys of `patch` absent from `declared`, recursing into objects.
void check_declared(const nlohmann::json& declared, const nlohmann::json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config: '" + prefix + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const auto path = prefix.empty() ? key : prefix + "." + key;
    if (!declared.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    if (declared.at(key).is_object()) check_declared(declared.at(key), value, path);
  }
}

}  // namespace

double TrainConfig::effective_learning_rate() const { return learning_rate.value_or(stage == 1 ? 2e-4 : 1e-4); }
int64_t TrainConfig::effective_batch_size() const { return batch_size.value_or(stage == 1 ? 64 : 16); }
int64_t TrainConfig::effective_max_steps() const { return max_steps.value_or(stage == 1 ? 2000 : 3000); }

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("train.stage must be 1 or 2");
  if (!(effective_learning_rate() > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (effective_batch_size() < 1) throw ConfigError("train.batch_size must be >= 1");
  if (effective_max_steps() < 0) throw ConfigError("train.max_steps must be >= 0");
  if (kl_warmup_steps < 0) throw ConfigError("train.kl_warmup_steps must be >= 0");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"stage", c.stage},
                     {"learning_rate", optional_json(c.learning_rate)},
                     {"batch_size", optional_json(c.batch_size)},
                     {"max_steps", optional_json(c.max_steps)},
                     {"seed", c.seed},
                     {"deterministic", c.deterministic},
                     {"kl_warmup_steps", c.kl_warmup_steps},
                     {"unimodal_mode", model::to_string(c.unimodal_mode)},
                     {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.stage = j.value("stage", d.stage);
  c.learning_rate = optional_from<double>(j, "learning_rate");
  c.batch_size = optional_from<int64_t>(j, "batch_size");
  c.max_steps = optional_from<int64_t>(j, "max_steps");
  c.seed = j.value("seed", d.seed);
  c.deterministic = j.value("deterministic", d.deterministic);
  c.kl_warmup_steps = j.value("kl_warmup_steps", d.kl_warmup_steps);
  c.unimodal_mode = model::modalities_from_string(j.value("unimodal_mode", std::string("none")));
  c.eval_every = j.value("eval_every", d.eval_every);
}

void PipelineConfig::resolve() {
  if (corpus.mode == features::SyntheticMode::Feature) {
    model.d_a = corpus.d_a;
    model.d_v = corpus.d_v;
  } else {
    model.d_a = vq_audio.feature_dim();
    model.d_v = vq_visual.feature_dim();
  }
  model.modalities = train.unimodal_mode;
}

void PipelineConfig::validate() const {
  corpus.validate();
  train.validate();
  model.validate();
  vq_audio.validate();
  vq_visual.validate();
  if (vq_audio.modality != vq::Modality::Audio) throw ConfigError("vq_audio.modality must be audio");
  if (vq_visual.modality != vq::Modality::Visual) throw ConfigError("vq_visual.modality must be visual");
  if (corpus.mode == features::SyntheticMode::RawLike) {
    if (vq_audio.frame_dim() != corpus.d_a || vq_visual.frame_dim() != corpus.d_v) {
      throw ConfigError("vq input sizes do not match the raw-like corpus frames");
    }
  }
}

nlohmann::json to_json(const PipelineConfig& c) {
  return nlohmann::json{{"corpus", c.corpus},
                        {"train", c.train},
                        {"model", c.model},
                        {"vq_audio", c.vq_audio},
                        {"vq_visual", c.vq_visual}};
}

PipelineConfig pipeline_from_json(const nlohmann::json& patch) {
  auto doc = to_json(PipelineConfig{});
  check_declared(doc, patch, "");
  doc.merge_patch(patch);
  // raw-like corpora have fixed observation dims unless set explicitly
  const auto& patch_corpus = patch.contains("corpus") ? patch["corpus"] : nlohmann::json::object();
  if (doc["corpus"].value("mode", "") == "raw-like") {
    if (!patch_corpus.contains("d_a")) doc["corpus"]["d_a"] = features::SyntheticFactorSpec::kSpectrumBins;
    if (!patch_corpus.contains("d_v")) {
      doc["corpus"]["d_v"] = features::SyntheticFactorSpec::kImageSide * features::SyntheticFactorSpec::kImageSide;
    }
  }
  PipelineConfig c;
  try {
    c.corpus = doc.at("corpus").get<features::SyntheticFactorSpec>();
    c.train = doc.at("train").get<TrainConfig>();
    c.model = doc.at("model").get<model::ModelConfig>();
    c.vq_audio = doc.at("vq_audio").get<vq::VQConfig>();
    c.vq_visual = doc.at("vq_visual").get<vq::VQConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.resolve();
  c.validate();
  return c;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);

  const auto declared = to_json(PipelineConfig{});
  const nlohmann::json* node = &declared;
  nlohmann::json::json_pointer ptr;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("override: unknown key '" + key + "'");
    node = &node->at(part);
    ptr /= part;
  }
  if (node->is_object()) throw ConfigError("override: '" + key + "' names a section, not a value");

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  config[ptr] = value;
}

std::optional<uint64_t> seed_from_environment() {
  const char* env = std::getenv("MDVAE_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("MDVAE_SEED is not an unsigned integer: '") + env + "'");
  }
}

PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides, std::optional<uint64_t> seed) {
  nlohmann::json patch = file ? read_config_file(*file) : nlohmann::json::object();
  check_declared(to_json(PipelineConfig{}), patch, "");
  if (const auto env = seed_from_environment()) {
    patch["corpus"]["seed"] = *env;
    patch["train"]["seed"] = *env;
  }
  for (const auto& o : overrides) apply_override(patch, o);
  if (seed) {
    patch["corpus"]["seed"] = *seed;
    patch["train"]["seed"] = *seed;
  }
  return pipeline_from_json(patch);
}

}  // namespace vqmd::train
