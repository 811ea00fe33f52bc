#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace vqmd::transform {

/// Half-open pixel box [r0, r1) x [c0, c1).
struct RegionBox {
  std::string name = "custom";
  int64_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;

  int64_t rows() const { return r1 - r0; }
  int64_t cols() const { return c1 - c0; }
  bool empty() const { return rows() <= 0 || cols() <= 0; }
  bool within(int64_t height, int64_t width) const {
    return r0 >= 0 && c0 >= 0 && r1 <= height && c1 <= width && !empty();
  }

  /// Box defined on a 64x64 face, rescaled outward to a `height` x `width` image.
  static RegionBox scaled(std::string name, int64_t r0, int64_t r1, int64_t c0, int64_t c1, int64_t height,
                          int64_t width) {
    const double sy = static_cast<double>(height) / 64.0, sx = static_cast<double>(width) / 64.0;
    return {std::move(name), static_cast<int64_t>(std::floor(r0 * sy)), static_cast<int64_t>(std::ceil(r1 * sy)),
            static_cast<int64_t>(std::floor(c0 * sx)), static_cast<int64_t>(std::ceil(c1 * sx))};
  }

  static RegionBox mouth(int64_t height = 64, int64_t width = 64) {
    return scaled("mouth", 40, 60, 18, 46, height, width);
  }
  static RegionBox eyes(int64_t height = 64, int64_t width = 64) {
    return scaled("eyes", 16, 32, 10, 54, height, width);
  }
};

}  // namespace vqmd::transform
