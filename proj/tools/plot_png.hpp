#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vqmd::cli {

struct Series {
  std::vector<double> x, y;
  int color = 0;  ///< palette index
};

/// Line chart: every series drawn as a polyline inside a shared axis box.
void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, int width = 640,
                     int height = 480);

/// Scatter chart: point i drawn in palette colour labels[i].
void write_scatter_plot(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<int>& labels, int width = 640, int height = 480);

}  // namespace vqmd::cli
