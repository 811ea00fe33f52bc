#pragma once

#include <torch/torch.h>

namespace vqmd::eval {

/// Ridge regression with an unpenalised intercept, solved in double precision.
struct RidgeModel {
  torch::Tensor weights;    ///< [d, k]
  torch::Tensor intercept;  ///< [k]

  torch::Tensor predict(const torch::Tensor& x) const;
};

/// Fits Y [N, k] (or [N]) from X [N, d] minimising ||Y - XW - b||^2 + lambda ||W||^2.
RidgeModel fit_ridge(const torch::Tensor& x, const torch::Tensor& y, double lambda);

/// Coefficient of determination per output column, averaged over columns.
/// A constant target column scores 1 when predicted exactly, else 0.
double r2_score(const torch::Tensor& y, const torch::Tensor& y_hat);

/// Fits on (x_train, y_train) and scores on (x_test, y_test).
double ridge_r2(const torch::Tensor& x_train, const torch::Tensor& y_train, const torch::Tensor& x_test,
                const torch::Tensor& y_test, double lambda);

}  // namespace vqmd::eval
