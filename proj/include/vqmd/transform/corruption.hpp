#pragma once

#include <torch/torch.h>

#include "vqmd/model/gaussian.hpp"
#include "vqmd/model/mdvae.hpp"
#include "vqmd/transform/region.hpp"
#include "vqmd/vq/vq_vae.hpp"

namespace vqmd::transform {

inline constexpr int64_t kCorruptionFrames = 10;
inline constexpr int64_t kFirstCorrupted = 2;
inline constexpr int64_t kLastCorrupted = 7;  ///< inclusive

/// Adds N(0, variance) noise to pixels inside `region` on frames 2..7 of a
/// 10-frame stack [10, C, H, W] with values in [0, 1], then clamps those
/// pixels to [0, 1]. Everything else is returned untouched.
torch::Tensor corrupt(const torch::Tensor& frames, const RegionBox& region, double variance, model::NoiseSource& noise);

/// Encodes the (possibly corrupted) frames [T, C, H, W] and the paired spectra
/// [T, bins] with the stage-1 encoders, infers posterior means, and decodes
/// the visual stream through the quantized stage-1 decoder. An audio-free
/// model ignores the spectra. Output has the shape of `frames`.
torch::Tensor denoise(const torch::Tensor& frames, const torch::Tensor& spectra, model::MDVAE& model,
                      vq::VQVAE& audio, vq::VQVAE& visual);

}  // namespace vqmd::transform
