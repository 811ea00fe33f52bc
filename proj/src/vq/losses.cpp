#include "vqmd/vq/losses.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::vq {

torch::Tensor is_divergence_elements(const torch::Tensor& x, const torch::Tensor& y) {
  const auto ratio = x / y;
  return ratio - torch::log(ratio) - 1.0;
}

double is_divergence(const torch::Tensor& x, const torch::Tensor& y) {
  require(x.sizes() == y.sizes(), "is_divergence: shape mismatch");
  const auto xd = x.to(torch::kFloat64), yd = y.to(torch::kFloat64);
  require((xd > 0).all().item<bool>() && (yd > 0).all().item<bool>(), "is_divergence: entries must be positive");
  return is_divergence_elements(xd, yd).sum().item<double>();
}

LossBundle stage1_loss(Modality modality, const torch::Tensor& input, const torch::Tensor& reconstruction,
                       const torch::Tensor& continuous, const torch::Tensor& quantized, double beta) {
  require(input.numel() == reconstruction.numel(), "stage1_loss: input and reconstruction sizes differ");
  require(continuous.sizes() == quantized.sizes(), "stage1_loss: continuous and quantized shapes differ");
  const auto target = input.reshape(reconstruction.sizes());
  LossBundle loss;
  if (modality == Modality::Visual) {
    loss.add("recon", (reconstruction - target).pow(2).mean());
  } else {
    loss.add("recon", is_divergence_elements(target, reconstruction).mean());
  }
  loss.add("commitment", (continuous - quantized.detach()).pow(2).mean(), beta);
  return loss;
}

}  // namespace vqmd::vq
