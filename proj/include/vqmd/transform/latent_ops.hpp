#pragma once

#include <torch/torch.h>

#include <initializer_list>
#include <string>

#include "vqmd/features/sequence.hpp"
#include "vqmd/model/mdvae.hpp"
#include "vqmd/vq/vq_vae.hpp"

namespace vqmd::transform {

enum class Latent { W, ZAV, ZA, ZV };

std::string to_string(Latent l);
/// Accepts w | zav | za | zv (case-insensitive, underscores ignored).
Latent latent_from_string(const std::string& s);

/// A non-empty subset of the four latent variables.
class SwapSpec {
 public:
  SwapSpec(std::initializer_list<Latent> latents);
  /// Comma-separated names, e.g. "w,zav".
  static SwapSpec parse(const std::string& list);

  bool contains(Latent l) const { return (mask_ >> static_cast<int>(l)) & 1U; }
  std::string str() const;

 private:
  unsigned mask_ = 0;
};

/// Posterior means of every latent. `x_a` / `x_v` are [T, d] (one sequence)
/// or [B, T, d]; the bundle follows the same batching (w is [l_w] or [B, l_w]).
model::LatentBundle analyze(model::MDVAE& model, const torch::Tensor& x_a, const torch::Tensor& x_v);

/// Latents named in `spec` from B, the rest from A. Dynamical swaps require equal T.
model::LatentBundle swap(const model::LatentBundle& a, const model::LatentBundle& b, const SwapSpec& spec);

/// (1 - alpha) w1 + alpha w2; alpha must lie in [0, 1].
torch::Tensor interpolate_w(const torch::Tensor& w1, const torch::Tensor& w2, double alpha);

/// Decoded means for a bundle (feature space), batching as in `analyze`.
features::AVFeatureSequence resynthesize_features(model::MDVAE& model, const model::LatentBundle& bundle);

/// Frames decoded through the stage-1 decoders.
struct RawResynthesis {
  torch::Tensor images;          ///< [T, C, H, W]
  torch::Tensor spectra;         ///< [T, bins]
  torch::Tensor visual_indices;  ///< [T, grid...] code indices fed to the visual decoder
  torch::Tensor audio_indices;
};

/// Feature-space means reshaped to code grids, quantized against the frozen
/// codebooks and decoded. One sequence (unbatched bundle). A null VQ model
/// skips its modality; the model's missing modality is skipped as well.
RawResynthesis resynthesize_raw(model::MDVAE& model, const model::LatentBundle& bundle, vq::VQVAE* audio,
                                vq::VQVAE* visual);

/// Continuous stage-1 codes of raw frames: spectra [T, bins] and images [T, C*H*W] (or [T, C, H, W]).
features::AVFeatureSequence encode_raw(vq::VQVAE& audio, vq::VQVAE& visual, const torch::Tensor& spectra,
                                       const torch::Tensor& images);

}  // namespace vqmd::transform
