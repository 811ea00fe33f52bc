#include "vqmd/eval/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vqmd/common/error.hpp"

namespace vqmd::eval {

torch::Tensor squared_distances(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.dim() == 2 && b.dim() == 2 && a.size(1) == b.size(1), "squared_distances: expected [M, d] and [N, d]");
  const auto A = a.to(torch::kFloat64), B = b.to(torch::kFloat64);
  const auto diff = A.unsqueeze(1) - B.unsqueeze(0);
  return diff.pow(2).sum(-1);
}

OtResult sinkhorn(const torch::Tensor& cost, const SinkhornOptions& options) {
  require(cost.dim() == 2 && cost.size(0) >= 1 && cost.size(1) >= 1, "sinkhorn: cost must be a non-empty matrix");
  const auto C = cost.to(torch::kFloat64);
  const auto M = C.size(0), N = C.size(1);
  OtResult r;
  r.cost = C;

  const double median = C.reshape({-1}).median().item<double>();
  const double scale = median > 0.0 ? median : C.max().item<double>();
  if (scale <= 0.0) {
    // Every pair is at distance zero: any coupling is optimal; take the product measure.
    r.plan = torch::full({M, N}, 1.0 / static_cast<double>(M * N), torch::kFloat64);
    return r;
  }
  r.reg = options.reg_scale * scale;

  // Log-domain iterations on potentials f, g (cost units). The regulariser
  // starts at the median cost and halves down to the target; each stage is
  // warm-started from the previous potentials and run to tolerance. The last
  // stage solves the target problem, so the fixed point is unchanged.
  const double log_a = -std::log(static_cast<double>(M));
  const double log_b = -std::log(static_cast<double>(N));
  const auto Cc = C.contiguous();
  const double* c = Cc.data_ptr<double>();
  std::vector<double> f(static_cast<size_t>(M), 0.0), g(static_cast<size_t>(N), 0.0);
  std::vector<double> col_max(static_cast<size_t>(N)), col_sum(static_cast<size_t>(N));
  const auto at = [&](int64_t i, int64_t j) { return c[i * N + j]; };

  // Row marginal error of the plan exp((f_i + g_j - C_ij) / eps).
  const auto row_error = [&](double eps) {
    double err = 0.0;
    for (int64_t i = 0; i < M; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < N; ++j) s += std::exp((f[i] + g[j] - at(i, j)) / eps);
      err = std::max(err, std::abs(s - std::exp(log_a)));
    }
    return err;
  };

  r.iterations = 0;
  r.converged = false;
  double eps = scale;
  while (true) {
    eps = std::max(0.5 * eps, r.reg);
    const bool last = eps == r.reg;
    bool stage_done = false;
    while (r.iterations < options.max_iterations) {
      ++r.iterations;
      for (int64_t i = 0; i < M; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < N; ++j) mx = std::max(mx, (g[j] - at(i, j)) / eps);
        double s = 0.0;
        for (int64_t j = 0; j < N; ++j) s += std::exp((g[j] - at(i, j)) / eps - mx);
        f[i] = eps * (log_a - mx - std::log(s));
      }
      std::fill(col_max.begin(), col_max.end(), -std::numeric_limits<double>::infinity());
      std::fill(col_sum.begin(), col_sum.end(), 0.0);
      for (int64_t i = 0; i < M; ++i) {
        for (int64_t j = 0; j < N; ++j) col_max[j] = std::max(col_max[j], (f[i] - at(i, j)) / eps);
      }
      for (int64_t i = 0; i < M; ++i) {
        for (int64_t j = 0; j < N; ++j) col_sum[j] += std::exp((f[i] - at(i, j)) / eps - col_max[j]);
      }
      for (int64_t j = 0; j < N; ++j) g[j] = eps * (log_b - col_max[j] - std::log(col_sum[j]));
      // after the g update the columns are exact; check the rows
      if (r.iterations % 10 == 0) {
        r.marginal_error = row_error(eps);
        if (r.marginal_error <= options.tolerance) {
          stage_done = true;
          break;
        }
      }
    }
    if (!stage_done) {
      r.marginal_error = row_error(r.reg);
      break;
    }
    if (last) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) {
    r.warning = "sinkhorn did not converge after " + std::to_string(options.max_iterations) +
                " iterations; marginal error " + std::to_string(r.marginal_error);
  }
  auto plan = torch::empty({M, N}, torch::kFloat64);
  auto p = plan.accessor<double, 2>();
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < N; ++j) p[i][j] = std::exp((f[i] + g[j] - at(i, j)) / r.reg);
  }
  r.plan = plan;
  return r;
}

OtResult ot_domain_adapt(const torch::Tensor& source, const torch::Tensor& target, const SinkhornOptions& options) {
  require(source.dim() == 2 && target.dim() == 2 && source.size(0) >= 1 && target.size(0) >= 1,
          "ot_domain_adapt: need non-empty [N, d] source and [M, d] target");
  require(source.size(1) == target.size(1), "ot_domain_adapt: dimension mismatch");
  auto r = sinkhorn(squared_distances(target, source), options);
  const auto X = source.to(torch::kFloat64);
  r.mapped = torch::matmul(r.plan, X) / r.plan.sum(1, true);
  return r;
}

double transport_cost(const torch::Tensor& plan, const torch::Tensor& cost) {
  require(plan.sizes() == cost.sizes(), "transport_cost: shape mismatch");
  return (plan.to(torch::kFloat64) * cost.to(torch::kFloat64)).sum().item<double>();
}

}  // namespace vqmd::eval
