#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace vqmd::model {

inline constexpr double kLogVarMin = -14.0;
inline constexpr double kLogVarMax = 14.0;

/// Diagonal Gaussian over the last dimension. Leading dimensions are batch/time.
struct DiagGaussian {
  torch::Tensor mean;
  torch::Tensor log_var;

  DiagGaussian() = default;
  /// Clamps `log_var` to [kLogVarMin, kLogVarMax].
  DiagGaussian(torch::Tensor mean, torch::Tensor log_var);

  static DiagGaussian standard(const torch::Tensor& like);

  DiagGaussian select(int64_t dim, int64_t index) const {
    return {mean.select(dim, index), log_var.select(dim, index)};
  }
};

/// Stacks per-step Gaussians along `dim`.
DiagGaussian stack(const std::vector<DiagGaussian>& steps, int64_t dim);

/// mean + exp(log_var / 2) * noise.
torch::Tensor reparameterize(const DiagGaussian& g, const torch::Tensor& noise);

/// KL(q || p) summed over the last dimension:
///   1/2 sum [ ln(var_p/var_q) + (var_q + (mu_q - mu_p)^2) / var_p - 1 ]
torch::Tensor kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p);

/// Standard-normal draws from a private generator. Two sources built from the
/// same seed produce the same sequence of draws; reset() rewinds.
class NoiseSource {
 public:
  explicit NoiseSource(uint64_t seed = 0);
  torch::Tensor normal(at::IntArrayRef sizes, const torch::TensorOptions& options);
  void reset();
  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  at::Generator gen_;
};

}  // namespace vqmd::model
