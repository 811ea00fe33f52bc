#pragma once

#include <torch/torch.h>

#include <json.hpp>
#include <string>
#include <vector>

#include "vqmd/vq/codebook.hpp"

namespace vqmd::vq {

enum class Modality { Audio, Visual };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

/// Stage-1 autoencoder configuration.
///
/// Visual: `input_size` x `input_size` images with `in_channels` channels, one
/// Conv2D(4, 2, 1) + ReLU per entry of `channels`, `residual_stacks` residual
/// blocks, a 1x1 projection to D. Audio: spectra of `input_size` bins through
/// Conv1D(4,2,1), Conv1D(4,2,1), Conv1D(3,2,1) with Tanh, residual blocks, 1x1
/// projection. Decoders mirror the encoders with transposed convolutions,
/// widths given by `decoder_channels`.
struct VQConfig {
  Modality modality = Modality::Visual;
  int64_t K = 512;
  int64_t D = 32;
  double commitment_beta = 0.25;
  double decay = 0.99;
  double laplace_eps = 1e-5;
  int64_t in_channels = 3;
  int64_t input_size = 64;
  std::vector<int64_t> channels{64, 128, 128};
  std::vector<int64_t> decoder_channels{64, 64};
  int64_t residual_stacks = 2;

  /// The full-size stacks: 3x64x64 -> 32x8x8 with 512 codes; 513 bins -> 8x64 with 128 codes.
  static VQConfig visual();
  static VQConfig audio();
  /// Narrow stacks for 16x16 grayscale frames / 65-bin spectra.
  static VQConfig visual_small();
  static VQConfig audio_small();

  /// Latent grid shape: {h, w} for visual, {length} for audio.
  std::vector<int64_t> grid() const;
  /// Flattened continuous-code dimension, D * prod(grid).
  int64_t feature_dim() const;
  /// Per-frame input element count (C*H*W or bins).
  int64_t frame_dim() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const VQConfig& c);
void from_json(const nlohmann::json& j, VQConfig& c);

struct VQForward {
  VQOutput vq;
  torch::Tensor reconstruction;
};

/// Per-modality VQ-VAE: encoder, EMA codebook, decoder.
class VQVAEImpl : public torch::nn::Module {
 public:
  explicit VQVAEImpl(VQConfig config);

  /// Frames as rows: visual [B, C*H*W] (channel-major) or [B, C, H, W];
  /// audio [B, bins] or [B, 1, bins]. Returns the continuous grid [B, D, grid...].
  torch::Tensor encode(const torch::Tensor& frames);
  VQOutput quantize(const torch::Tensor& grid) const { return codebook_->quantize(grid); }
  /// Grid [B, D, grid...] -> reconstruction shaped like the encoder input
  /// ([B, C, H, W] or [B, 1, bins]). Audio output is strictly positive.
  torch::Tensor decode(const torch::Tensor& grid);
  VQForward forward(const torch::Tensor& frames);

  /// Continuous codes flattened channel-major to [B, feature_dim].
  torch::Tensor encode_features(const torch::Tensor& frames);
  /// Reshapes [B, feature_dim] features to the code grid, quantizes, decodes.
  torch::Tensor decode_features(const torch::Tensor& features, torch::Tensor* indices = nullptr);

  const VQConfig& config() const { return config_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }

  /// Encoder/decoder weights (excludes the codebook, which learns by EMA).
  std::vector<torch::Tensor> network_parameters();

 private:
  torch::Tensor as_input(const torch::Tensor& frames) const;
  torch::Tensor activation(const torch::Tensor& x) const;

  VQConfig config_;
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::ModuleList encoder_res_{nullptr};
  std::shared_ptr<torch::nn::Module> encoder_proj_;
  std::shared_ptr<torch::nn::Module> decoder_proj_;
  torch::nn::ModuleList decoder_res_{nullptr};
  torch::nn::ModuleList decoder_up_{nullptr};
  Codebook codebook_{nullptr};
};
TORCH_MODULE(VQVAE);

}  // namespace vqmd::vq
