#pragma once

#include <torch/torch.h>

namespace vqmd::vq {

/// Result of snapping a code grid onto a codebook.
struct VQOutput {
  torch::Tensor continuous;  ///< encoder output, [B, D, grid...]
  torch::Tensor indices;     ///< int64, [B, grid...]
  torch::Tensor quantized;   ///< codebook vectors, [B, D, grid...]; gradients pass straight through to `continuous`
  torch::Tensor commitment;  ///< mean ||continuous - sg(quantized)||^2
  torch::Tensor codebook;    ///< mean ||sg(continuous) - quantized||^2 (diagnostic; the codebook learns by EMA)
};

/// K x D code vectors learned by exponential moving averages.
///
/// State: per-code counts N_k and sums m_k. Each update with batch counts n_k
/// and assigned sums s_k does
///   N_k <- decay * N_k + (1 - decay) * n_k
///   m_k <- decay * m_k + (1 - decay) * s_k
///   e_k  = m_k / N~_k,   N~_k = (N_k + eps) / (sum N + K eps) * sum N
/// The buffers are registered on the module so checkpoints carry them.
class CodebookImpl : public torch::nn::Module {
 public:
  CodebookImpl(int64_t num_codes, int64_t code_dim, double decay = 0.99, double laplace_eps = 1e-5);

  /// Nearest code per grid cell (Euclidean; ties go to the lowest index).
  /// `grid` is [B, D, spatial...]; the returned `quantized` carries a
  /// straight-through gradient to `grid`.
  VQOutput quantize(const torch::Tensor& grid) const;

  /// Nearest-code indices for rows of an [N, D] matrix.
  torch::Tensor nearest(const torch::Tensor& rows) const;

  /// One EMA step from flattened assignments `indices` [N] and their vectors `rows` [N, D].
  void ema_update(const torch::Tensor& indices, const torch::Tensor& rows);

  /// Overwrites the state (used by tests and checkpoint loading).
  void set_state(const torch::Tensor& vectors, const torch::Tensor& counts, const torch::Tensor& sums);

  const torch::Tensor& vectors() const { return vectors_; }
  const torch::Tensor& counts() const { return ema_counts_; }
  const torch::Tensor& sums() const { return ema_sums_; }
  int64_t num_codes() const { return vectors_.size(0); }
  int64_t code_dim() const { return vectors_.size(1); }
  double decay() const { return decay_; }
  double laplace_eps() const { return laplace_eps_; }

 private:
  torch::Tensor vectors_, ema_counts_, ema_sums_;
  double decay_;
  double laplace_eps_;
};
TORCH_MODULE(Codebook);

/// Identity in the forward pass returning `codes` exactly; routes the incoming
/// gradient unchanged to `continuous`.
torch::Tensor straight_through(const torch::Tensor& continuous, const torch::Tensor& codes);

}  // namespace vqmd::vq
