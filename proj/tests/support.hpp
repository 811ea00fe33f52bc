#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <random>
#include <string>

namespace vqmd::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("vqmd-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.dtype() == b.dtype() && torch::equal(a, b);
}

/// Coefficient of determination of an ordinary least-squares fit with
/// intercept, computed through the normal equations in double precision.
/// Written independently of the library's ridge solver.
inline double least_squares_r2(const torch::Tensor& x, const torch::Tensor& y) {
  const auto X = torch::cat({x.to(torch::kFloat64), torch::ones({x.size(0), 1}, torch::kFloat64)}, 1);
  const auto Y = y.to(torch::kFloat64).reshape({y.size(0), -1});
  const auto gram = X.t().mm(X) + 1e-10 * torch::eye(X.size(1), torch::kFloat64);
  const auto beta = torch::linalg_solve(gram, X.t().mm(Y));
  const auto resid = Y - X.mm(beta);
  const auto centred = Y - Y.mean(0, true);
  const auto r2 = 1.0 - resid.pow(2).sum(0) / centred.pow(2).sum(0);
  return r2.mean().item<double>();
}

}  // namespace vqmd::testing
