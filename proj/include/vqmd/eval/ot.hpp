#pragma once

#include <torch/torch.h>

#include <string>

namespace vqmd::eval {

struct SinkhornOptions {
  double reg_scale = 0.01;  ///< entropic regulariser = reg_scale * median pairwise cost
  double tolerance = 1e-6;  ///< max absolute marginal violation
  int64_t max_iterations = 100000;
};

struct OtResult {
  torch::Tensor mapped;  ///< [M, d], barycentric image of each target point in the source cloud
  torch::Tensor plan;    ///< [M, N], rows sum to 1/M, columns to 1/N
  torch::Tensor cost;    ///< [M, N] squared Euclidean distances
  double reg = 0.0;
  int64_t iterations = 0;
  double marginal_error = 0.0;
  bool converged = true;
  std::string warning;   ///< set when the iteration budget ran out
};

/// Pairwise squared Euclidean distances [M, N] between rows of a [M, d] and b [N, d].
torch::Tensor squared_distances(const torch::Tensor& a, const torch::Tensor& b);

/// Entropic OT between uniform empirical measures, solved by log-domain
/// Sinkhorn iterations in double precision.
OtResult sinkhorn(const torch::Tensor& cost, const SinkhornOptions& options = {});

/// Maps target points onto the source distribution: plan between target
/// (rows) and source (columns), then mapped_j = sum_i P_ji x_i / sum_i P_ji.
/// Labels are never used. Non-convergence is reported in the result, not thrown.
OtResult ot_domain_adapt(const torch::Tensor& source, const torch::Tensor& target, const SinkhornOptions& options = {});

/// sum_ij P_ij C_ij.
double transport_cost(const torch::Tensor& plan, const torch::Tensor& cost);

}  // namespace vqmd::eval
