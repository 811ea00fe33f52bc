#include "vqmd/features/frames.hpp"

#include <algorithm>
#include <cmath>

#include "vqmd/common/error.hpp"

namespace vqmd::features {

namespace {

struct Tap {
  int64_t lo, hi;
  double frac;
};

std::vector<Tap> taps(int64_t in, int64_t out) {
  std::vector<Tap> result(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    const double src = std::max(0.0, (static_cast<double>(o) + 0.5) * scale - 0.5);
    const auto lo = std::min(static_cast<int64_t>(src), in - 1);
    result[static_cast<size_t>(o)] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return result;
}

}  // namespace

torch::Tensor resize_bilinear(const torch::Tensor& image, int64_t out_h, int64_t out_w) {
  require(image.dim() == 3, "resize: expected H x W x C image");
  require(out_h > 0 && out_w > 0, "resize: empty target");
  const auto src = image.to(torch::kFloat64).contiguous();
  const int64_t in_h = src.size(0), in_w = src.size(1), ch = src.size(2);
  if (in_h == out_h && in_w == out_w) return src.to(torch::kFloat32);

  const auto rows = taps(in_h, out_h);
  const auto cols = taps(in_w, out_w);
  auto out = torch::empty({out_h, out_w, ch}, torch::kFloat64);
  auto s = src.accessor<double, 3>();
  auto d = out.accessor<double, 3>();
  for (int64_t y = 0; y < out_h; ++y) {
    const auto& r = rows[static_cast<size_t>(y)];
    for (int64_t x = 0; x < out_w; ++x) {
      const auto& c = cols[static_cast<size_t>(x)];
      for (int64_t k = 0; k < ch; ++k) {
        const double top = s[r.lo][c.lo][k] * (1.0 - c.frac) + s[r.lo][c.hi][k] * c.frac;
        const double bottom = s[r.hi][c.lo][k] * (1.0 - c.frac) + s[r.hi][c.hi][k] * c.frac;
        d[y][x][k] = top * (1.0 - r.frac) + bottom * r.frac;
      }
    }
  }
  return out.to(torch::kFloat32);
}

torch::Tensor preprocess_frames(const std::vector<torch::Tensor>& frames, int64_t out_h, int64_t out_w) {
  require(!frames.empty(), "preprocess_frames: empty frame list");
  std::vector<torch::Tensor> rows;
  rows.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    require(f.dim() == 3 && f.size(2) == 3, "preprocess_frames: frame " + std::to_string(i) + " is not H x W x 3");
    require(torch::isfinite(f).all().item<bool>(), "preprocess_frames: frame " + std::to_string(i) + " has non-finite pixels");
    rows.push_back(resize_bilinear(f, out_h, out_w).clamp(0.0, 1.0).permute({2, 0, 1}).reshape({-1}));
  }
  return torch::stack(rows);
}

}  // namespace vqmd::features
