#pragma once

#include <torch/torch.h>

#include <vector>

namespace vqmd::features {

/// Bilinear resize of an H x W x C image with half-pixel sample centres
/// (the align_corners=false convention), edges clamped.
torch::Tensor resize_bilinear(const torch::Tensor& image, int64_t out_h, int64_t out_w);

/// Resizes pre-cropped RGB face frames to `out_h` x `out_w` and flattens each
/// one channel-major (C, H, W). Returns T x (3 * out_h * out_w), clamped to [0,1].
torch::Tensor preprocess_frames(const std::vector<torch::Tensor>& frames, int64_t out_h = 64,
                                int64_t out_w = 64);

}  // namespace vqmd::features
