#include "vqmd/vq/codebook.hpp"

#include <cmath>

#include "vqmd/common/error.hpp"

namespace vqmd::vq {

namespace {

struct StraightThrough : torch::autograd::Function<StraightThrough> {
  static torch::Tensor forward(torch::autograd::AutogradContext* /*ctx*/, const torch::Tensor& continuous,
                               const torch::Tensor& codes) {
    (void)continuous;
    return codes.detach().clone();
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* /*ctx*/,
                                               torch::autograd::tensor_list grads) {
    return {grads[0], torch::Tensor()};
  }
};

}  // namespace

torch::Tensor straight_through(const torch::Tensor& continuous, const torch::Tensor& codes) {
  return StraightThrough::apply(continuous, codes);
}

CodebookImpl::CodebookImpl(int64_t num_codes, int64_t code_dim, double decay, double laplace_eps)
    : decay_(decay), laplace_eps_(laplace_eps) {
  if (num_codes < 1 || code_dim < 1) throw ConfigError("codebook: K and D must be >= 1");
  require(decay > 0.0 && decay < 1.0, "codebook: decay must lie in (0, 1)");
  require(laplace_eps >= 0.0, "codebook: laplace eps must be >= 0");
  auto init = torch::randn({num_codes, code_dim}) / std::sqrt(static_cast<double>(code_dim));
  vectors_ = register_buffer("vectors", init);
  ema_counts_ = register_buffer("ema_counts", torch::ones({num_codes}));
  ema_sums_ = register_buffer("ema_sums", init.clone());
}

torch::Tensor CodebookImpl::nearest(const torch::Tensor& rows) const {
  if (num_codes() == 0) throw ConfigError("codebook: empty");
  require(rows.dim() == 2 && rows.size(1) == code_dim(),
          "quantize: code dim " + std::to_string(rows.size(-1)) + " does not match codebook dim " +
              std::to_string(code_dim()));
  const auto z = rows.detach().to(torch::kFloat64);
  const auto e = vectors_.to(torch::kFloat64);
  const auto dist = z.pow(2).sum(1, true) - 2.0 * torch::matmul(z, e.t()) + e.pow(2).sum(1).unsqueeze(0);
  return dist.argmin(1);
}

VQOutput CodebookImpl::quantize(const torch::Tensor& grid) const {
  require(grid.dim() >= 2 && grid.size(1) == code_dim(),
          "quantize: grid channel dim does not match codebook dim " + std::to_string(code_dim()));
  // [B, D, s...] -> [B, s..., D] -> [N, D]
  std::vector<int64_t> perm{0};
  for (int64_t d = 2; d < grid.dim(); ++d) perm.push_back(d);
  perm.push_back(1);
  const auto channels_last = grid.permute(perm).contiguous();
  const auto rows = channels_last.reshape({-1, code_dim()});
  const auto idx = nearest(rows);

  auto cells = channels_last.sizes().vec();
  cells.pop_back();
  std::vector<int64_t> inverse(static_cast<size_t>(grid.dim()));
  for (size_t i = 0; i < perm.size(); ++i) inverse[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);

  const auto codes =
      vectors_.to(grid.scalar_type()).index_select(0, idx).reshape(channels_last.sizes()).permute(inverse).contiguous();

  VQOutput out;
  out.continuous = grid;
  out.indices = idx.reshape(cells);
  out.quantized = straight_through(grid, codes);
  out.commitment = (grid - codes.detach()).pow(2).mean();
  out.codebook = (grid.detach() - codes).pow(2).mean();
  return out;
}

void CodebookImpl::ema_update(const torch::Tensor& indices, const torch::Tensor& rows) {
  torch::NoGradGuard no_grad;
  const auto idx = indices.reshape({-1}).to(torch::kInt64);
  const auto z = rows.detach().reshape({-1, code_dim()}).to(vectors_.scalar_type());
  require(idx.size(0) == z.size(0), "ema_update: index/vector count mismatch");

  const auto onehot = torch::zeros({idx.size(0), num_codes()}, z.options()).scatter_(1, idx.unsqueeze(1), 1.0);
  const auto batch_counts = onehot.sum(0);
  const auto batch_sums = torch::matmul(onehot.t(), z);

  ema_counts_.mul_(decay_).add_(batch_counts, 1.0 - decay_);
  ema_sums_.mul_(decay_).add_(batch_sums, 1.0 - decay_);

  const auto total = ema_counts_.sum();
  const auto smoothed = (ema_counts_ + laplace_eps_) / (total + num_codes() * laplace_eps_) * total;
  vectors_.copy_(ema_sums_ / smoothed.unsqueeze(1));
}

void CodebookImpl::set_state(const torch::Tensor& vectors, const torch::Tensor& counts, const torch::Tensor& sums) {
  require(vectors.sizes() == vectors_.sizes() && sums.sizes() == ema_sums_.sizes() &&
              counts.sizes() == ema_counts_.sizes(),
          "codebook: state shape mismatch");
  torch::NoGradGuard no_grad;
  vectors_.copy_(vectors);
  ema_counts_.copy_(counts);
  ema_sums_.copy_(sums);
}

}  // namespace vqmd::vq
