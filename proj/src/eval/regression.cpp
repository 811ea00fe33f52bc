#include "vqmd/eval/regression.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::eval {

namespace {

torch::Tensor as_matrix(const torch::Tensor& y) { return y.dim() == 1 ? y.unsqueeze(1) : y; }

}  // namespace

torch::Tensor RidgeModel::predict(const torch::Tensor& x) const {
  return torch::matmul(x.to(torch::kFloat64), weights) + intercept;
}

RidgeModel fit_ridge(const torch::Tensor& x, const torch::Tensor& y, double lambda) {
  require(x.dim() == 2, "fit_ridge: x must be [N, d]");
  const auto Y = as_matrix(y).to(torch::kFloat64);
  require(Y.size(0) == x.size(0), "fit_ridge: x and y row counts differ");
  require(lambda >= 0.0, "fit_ridge: lambda must be >= 0");
  const auto X = x.to(torch::kFloat64);
  const auto x_mean = X.mean(0), y_mean = Y.mean(0);
  const auto Xc = X - x_mean, Yc = Y - y_mean;
  const auto d = X.size(1);
  const auto gram = torch::matmul(Xc.t(), Xc) + lambda * torch::eye(d, torch::kFloat64);
  // Least-squares solve tolerates a singular Gram matrix when lambda = 0.
  const auto W = std::get<0>(torch::linalg_lstsq(gram, torch::matmul(Xc.t(), Yc), std::nullopt, "gelsd"));
  return {W, y_mean - torch::matmul(x_mean, W)};
}

double r2_score(const torch::Tensor& y, const torch::Tensor& y_hat) {
  const auto Y = as_matrix(y).to(torch::kFloat64);
  const auto P = as_matrix(y_hat).to(torch::kFloat64);
  require(Y.sizes() == P.sizes(), "r2_score: shape mismatch");
  double total = 0.0;
  for (int64_t k = 0; k < Y.size(1); ++k) {
    const auto yk = Y.select(1, k), pk = P.select(1, k);
    const double ss_res = (yk - pk).pow(2).sum().item<double>();
    const double ss_tot = (yk - yk.mean()).pow(2).sum().item<double>();
    total += ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  }
  return total / static_cast<double>(Y.size(1));
}

double ridge_r2(const torch::Tensor& x_train, const torch::Tensor& y_train, const torch::Tensor& x_test,
                const torch::Tensor& y_test, double lambda) {
  return r2_score(y_test, fit_ridge(x_train, y_train, lambda).predict(x_test));
}

}  // namespace vqmd::eval
