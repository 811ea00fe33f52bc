#pragma once

#include <torch/torch.h>

#include "vqmd/common/loss_bundle.hpp"
#include "vqmd/vq/vq_vae.hpp"

namespace vqmd::vq {

/// Itakura-Saito divergence sum_i [x_i/y_i - ln(x_i/y_i) - 1] between two
/// strictly positive spectra. Throws InvalidInput on non-positive entries.
double is_divergence(const torch::Tensor& x, const torch::Tensor& y);

/// Elementwise IS terms, differentiable in `y`; no validation.
torch::Tensor is_divergence_elements(const torch::Tensor& x, const torch::Tensor& y);

/// Stage-1 objective: "recon" (pixel MSE for visual, per-bin mean IS
/// divergence for audio) plus "commitment" mean ||continuous - sg(quantized)||^2
/// weighted by beta. The codebook itself moves by EMA, not through this loss.
LossBundle stage1_loss(Modality modality, const torch::Tensor& input, const torch::Tensor& reconstruction,
                       const torch::Tensor& continuous, const torch::Tensor& quantized, double beta);

}  // namespace vqmd::vq
