#include "plot_png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "vqmd/common/error.hpp"

namespace vqmd::cli {

namespace {

using Rgb = std::array<uint8_t, 3>;

constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
                            {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
constexpr int kMargin = 40;

Rgb palette(int i) { return kPalette[static_cast<size_t>(std::abs(i)) % std::size(kPalette)]; }

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<size_t>(w * h * 3), 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[static_cast<size_t>((y * w_ + x) * 3)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, Rgb c) {
    for (int oy = -2; oy <= 2; ++oy) {
      for (int ox = -2; ox <= 2; ++ox) {
        if (ox * ox + oy * oy <= 5) set(x + ox, y + oy, c);
      }
    }
  }

  void frame() {
    const Rgb k{0, 0, 0};
    line(kMargin, kMargin, w_ - kMargin, kMargin, k);
    line(kMargin, h_ - kMargin, w_ - kMargin, h_ - kMargin, k);
    line(kMargin, kMargin, kMargin, h_ - kMargin, k);
    line(w_ - kMargin, kMargin, w_ - kMargin, h_ - kMargin, k);
  }

  void save(const std::filesystem::path& path) const {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) throw ConfigError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw ConfigError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y) {
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<size_t>(y * w_ * 3)]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_, h_;
  std::vector<uint8_t> px_;
};

struct Axis {
  double lo, hi;
  double map(double v, int a, int b) const {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    return a + t * (b - a);
  }
};

Axis range_of(const std::vector<const std::vector<double>*>& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : values) {
    for (const auto x : *v) {
      if (!std::isfinite(x)) continue;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  const double pad = hi > lo ? 0.05 * (hi - lo) : 0.5;
  return {lo - pad, hi + pad};
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, int width, int height) {
  Canvas c(width, height);
  c.frame();
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : series) {
    xs.push_back(&s.x);
    ys.push_back(&s.y);
  }
  const auto ax = range_of(xs), ay = range_of(ys);
  for (const auto& s : series) {
    const auto col = palette(s.color);
    int px = -1, py = -1;
    for (size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const int x = static_cast<int>(std::lround(ax.map(s.x[i], kMargin, width - kMargin)));
      const int y = static_cast<int>(std::lround(ay.map(s.y[i], height - kMargin, kMargin)));
      if (px >= 0) c.line(px, py, x, y, col);
      if (s.x.size() <= 100) c.dot(x, y, col);
      px = x;
      py = y;
    }
  }
  c.save(path);
}

void write_scatter_plot(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<int>& labels, int width, int height) {
  require(x.size() == y.size() && x.size() == labels.size(), "scatter: x, y and labels must have equal length");
  Canvas c(width, height);
  c.frame();
  const auto ax = range_of({&x}), ay = range_of({&y});
  for (size_t i = 0; i < x.size(); ++i) {
    c.dot(static_cast<int>(std::lround(ax.map(x[i], kMargin, width - kMargin))),
          static_cast<int>(std::lround(ay.map(y[i], height - kMargin, kMargin))), palette(labels[i]));
  }
  c.save(path);
}

}  // namespace vqmd::cli
