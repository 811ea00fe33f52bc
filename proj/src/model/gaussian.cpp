#include "vqmd/model/gaussian.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "vqmd/common/error.hpp"

namespace vqmd::model {

DiagGaussian::DiagGaussian(torch::Tensor m, torch::Tensor lv)
    : mean(std::move(m)), log_var(lv.clamp(kLogVarMin, kLogVarMax)) {
  require(mean.sizes() == log_var.sizes(), "DiagGaussian: mean and log_var lengths differ");
}

DiagGaussian DiagGaussian::standard(const torch::Tensor& like) {
  return {torch::zeros_like(like), torch::zeros_like(like)};
}

DiagGaussian stack(const std::vector<DiagGaussian>& steps, int64_t dim) {
  std::vector<torch::Tensor> means, log_vars;
  means.reserve(steps.size());
  log_vars.reserve(steps.size());
  for (const auto& g : steps) {
    means.push_back(g.mean);
    log_vars.push_back(g.log_var);
  }
  DiagGaussian out;
  out.mean = torch::stack(means, dim);
  out.log_var = torch::stack(log_vars, dim);
  return out;
}

torch::Tensor reparameterize(const DiagGaussian& g, const torch::Tensor& noise) {
  require(noise.sizes() == g.mean.sizes(), "reparameterize: noise shape does not match the distribution");
  return g.mean + torch::exp(0.5 * g.log_var) * noise;
}

torch::Tensor kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  require(q.mean.sizes() == p.mean.sizes(), "kl_diag_gaussian: dimension mismatch");
  const auto var_ratio = torch::exp(q.log_var - p.log_var);
  const auto mahalanobis = (q.mean - p.mean).pow(2) * torch::exp(-p.log_var);
  return 0.5 * (p.log_var - q.log_var + var_ratio + mahalanobis - 1.0).sum(-1);
}

NoiseSource::NoiseSource(uint64_t seed) : seed_(seed), gen_(at::make_generator<at::CPUGeneratorImpl>(seed)) {}

torch::Tensor NoiseSource::normal(at::IntArrayRef sizes, const torch::TensorOptions& options) {
  return torch::randn(sizes, gen_, options);
}

void NoiseSource::reset() { gen_ = at::make_generator<at::CPUGeneratorImpl>(seed_); }

}  // namespace vqmd::model
