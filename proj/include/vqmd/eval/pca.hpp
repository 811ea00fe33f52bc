#pragma once

#include <torch/torch.h>

namespace vqmd::eval {

struct PcaResult {
  torch::Tensor projection;       ///< [N, k]
  torch::Tensor components;       ///< [k, d], orthonormal rows (rows past min(N, d) are zero)
  torch::Tensor explained_ratio;  ///< [k], fraction of total variance per component
  torch::Tensor mean;             ///< [d]
};

/// Projects mean-centred points [N, d] onto the top-k right singular vectors.
/// Identical points give a zero projection and zero ratios.
PcaResult pca_project(const torch::Tensor& points, int64_t k);

}  // namespace vqmd::eval
