#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vqmd/features/synthetic.hpp"
#include "vqmd/model/config.hpp"
#include "vqmd/vq/vq_vae.hpp"

namespace vqmd::train {

/// Optimisation settings of one training stage. Unset optional fields take
/// the stage default (learning rate 2e-4 / 1e-4, batch 64 frames / 16
/// sequences, 2000 / 3000 steps for stage 1 / 2).
struct TrainConfig {
  int stage = 2;
  std::optional<double> learning_rate;
  std::optional<int64_t> batch_size;
  std::optional<int64_t> max_steps;
  uint64_t seed = 0;
  bool deterministic = false;
  int64_t kl_warmup_steps = 0;
  model::Modalities unimodal_mode = model::Modalities::Both;
  int64_t eval_every = 0;  ///< validation-loss logging period in steps; 0 disables

  double effective_learning_rate() const;
  int64_t effective_batch_size() const;
  int64_t effective_max_steps() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Everything a CLI run needs. JSON sections: corpus, train, model, vq_audio, vq_visual.
struct PipelineConfig {
  features::SyntheticFactorSpec corpus;
  TrainConfig train;
  model::ModelConfig model = model::ModelConfig::desk(32, 64);
  vq::VQConfig vq_audio = vq::VQConfig::audio_small();
  vq::VQConfig vq_visual = vq::VQConfig::visual_small();

  /// Sets the model's observation dims from the corpus (feature mode) or the
  /// stage-1 grids (raw-like mode), and its modalities from train.unimodal_mode.
  void resolve();
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);

/// Merges `patch` into the defaults and parses. Unknown keys throw ConfigError.
PipelineConfig pipeline_from_json(const nlohmann::json& patch);

/// Reads a JSON file; throws ConfigError naming `path` if unreadable or malformed.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Applies "section.key=value" to `config`. The key must already exist in the
/// default document. The value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Seed from MDVAE_SEED, if set. Throws ConfigError on a malformed value.
std::optional<uint64_t> seed_from_environment();

/// Defaults <- file <- MDVAE_SEED <- overrides <- explicit seed. The seed
/// applies to both corpus.seed and train.seed.
PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides, std::optional<uint64_t> seed);

}  // namespace vqmd::train
