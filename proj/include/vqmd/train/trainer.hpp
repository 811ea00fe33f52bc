#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vqmd/features/sequence.hpp"
#include "vqmd/model/mdvae.hpp"
#include "vqmd/train/checkpoint.hpp"
#include "vqmd/train/config_io.hpp"
#include "vqmd/vq/vq_vae.hpp"

namespace vqmd::train {

/// Loss values of one optimiser step (or one validation pass).
struct LossRecord {
  int64_t step = 0;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;
};

nlohmann::json to_json(const std::vector<LossRecord>& log);

struct TrainHooks {
  /// Called after each step with its record.
  std::function<void(const LossRecord&)> on_step;
  /// On divergence the pre-step (last good) state is saved here before throwing.
  std::optional<std::filesystem::path> divergence_checkpoint;
};

struct Stage1Result {
  vq::VQVAE model{nullptr};
  std::vector<LossRecord> log;
};

/// Trains one VQ-VAE on frames [N, frame_dim] with per-frame shuffled
/// minibatches: Adam on the encoder/decoder, then one EMA codebook update
/// from the same batch's assignments. Throws NumericError on a non-finite
/// loss or gradient.
Stage1Result train_stage1(const vq::VQConfig& config, const torch::Tensor& frames, const TrainConfig& train,
                          const TrainHooks& hooks = {});

struct Stage2Data {
  torch::Tensor x_a;  ///< [N, T, d_a]; undefined for a visual-only model
  torch::Tensor x_v;  ///< [N, T, d_v]; undefined for an audio-only model
};

struct Stage2Result {
  model::MDVAE model{nullptr};
  std::vector<LossRecord> log;
  std::vector<LossRecord> validation;
};

/// Trains the MDVAE on stacked feature sequences by minimising the negative
/// ELBO with Adam. Sequences longer than model.T_train are randomly cropped.
Stage2Result train_stage2(const model::ModelConfig& config, const Stage2Data& data, const TrainConfig& train,
                          const TrainHooks& hooks = {}, const Stage2Data* validation = nullptr);

/// Stacks sequences to [N, T, d]; all must share T.
Stage2Data stack_sequences(const std::vector<features::AVFeatureSequence>& sequences);

/// All frames of the corpus as rows: visual [sum T, d_v], audio [sum T, d_a].
torch::Tensor stack_frames(const std::vector<features::AVFeatureSequence>& sequences, vq::Modality modality);

/// Continuous stage-1 codes of every frame (no gradient). The result keeps
/// ids and factors; x_a / x_v become [T, feature_dim].
std::vector<features::AVFeatureSequence> encode_with_vq(const std::vector<features::AVFeatureSequence>& sequences,
                                                        vq::VQVAE& audio, vq::VQVAE& visual);

/// Posterior-mean reconstruction MSE per modality, averaged over all entries.
struct ReconstructionError {
  double audio = 0.0;
  double visual = 0.0;
};
ReconstructionError reconstruction_error(model::MDVAE& model, const Stage2Data& data);

Checkpoint vq_checkpoint(vq::VQVAE& model, int64_t step, const std::vector<LossRecord>& log);
vq::VQVAE vq_from_checkpoint(const Checkpoint& ckpt);
Checkpoint mdvae_checkpoint(model::MDVAE& model, int64_t step, const std::vector<LossRecord>& log);
model::MDVAE mdvae_from_checkpoint(const Checkpoint& ckpt);

/// Seeds torch and, when `deterministic`, pins one intra-op thread and deterministic kernels.
void configure_runtime(uint64_t seed, bool deterministic);

}  // namespace vqmd::train
