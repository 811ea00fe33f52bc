#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vqmd/transform/region.hpp"

namespace vqmd::eval {

inline constexpr double kPsnrCap = 120.0;
inline constexpr double kSisdrCap = 120.0;
inline constexpr int64_t kSsimWindow = 8;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct VisualMetrics {
  double mse = 0.0;
  double psnr = 0.0;
  double scc = 0.0;
  double ssim = 0.0;
};

/// 10 log10(1 / mse), capped at 120 dB (mse = 0 gives the cap).
double psnr_from_mse(double mse);

/// Image-quality metrics for stacks shaped [H, W], [C, H, W] or [N, C, H, W]
/// with values in [0, 1].
///  - MSE: mean squared pixel error.
///  - PSNR: psnr_from_mse(MSE).
///  - SCC: Pearson correlation of the 3x3 Laplacian responses (replicate padding).
///  - SSIM: mean over all 8x8 windows (stride 1, uniform weights, population
///    moments), C1 = (0.01)^2, C2 = (0.03)^2; the window shrinks to the region
///    when the region is smaller than 8 pixels along an axis.
/// With a region, every metric only looks at pixels inside the box (filters
/// run on the full image first).
VisualMetrics visual_metrics(const torch::Tensor& ref, const torch::Tensor& est,
                             const std::optional<transform::RegionBox>& region = std::nullopt);

/// Scale-invariant SDR in dB, capped to [-120, 120]. Throws InvalidInput for a zero reference.
double sisdr(const torch::Tensor& ref, const torch::Tensor& est);

/// Mean and population standard deviation.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  int64_t count = 0;
};
Summary summarize(const std::vector<double>& values);

struct MetricRow {
  std::string sequence_id;
  std::string condition;
  std::string metric;
  double value = 0.0;
};

/// Columns: sequence_id, condition, metric, value.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace vqmd::eval
