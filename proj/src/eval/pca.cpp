#include "vqmd/eval/pca.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::eval {

PcaResult pca_project(const torch::Tensor& points, int64_t k) {
  require(points.dim() == 2 && points.size(0) >= 2, "pca_project: need at least two points [N, d]");
  require(k >= 1 && k <= points.size(1), "pca_project: k must lie in [1, d]");
  const auto X = points.to(torch::kFloat64);
  PcaResult r;
  r.mean = X.mean(0);
  const auto Xc = X - r.mean;
  const auto [U, S, Vh] = torch::linalg_svd(Xc, false);
  const auto kk = std::min<int64_t>(k, Vh.size(0));
  r.components = torch::zeros({k, X.size(1)}, torch::kFloat64);
  r.components.slice(0, 0, kk).copy_(Vh.slice(0, 0, kk));
  const auto var = S.pow(2);
  const double total = var.sum().item<double>();
  r.explained_ratio = torch::zeros({k}, torch::kFloat64);
  if (total > 0.0) {
    r.explained_ratio.slice(0, 0, kk).copy_(var.slice(0, 0, kk) / total);
    r.projection = torch::matmul(Xc, r.components.t());
  } else {
    r.projection = torch::zeros({X.size(0), k}, torch::kFloat64);
  }
  return r;
}

}  // namespace vqmd::eval
