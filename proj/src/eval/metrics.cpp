#include "vqmd/eval/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "vqmd/common/error.hpp"
#include "vqmd/train/tensor_file.hpp"

namespace vqmd::eval {

namespace {

torch::Tensor as_nchw(const torch::Tensor& x) {
  switch (x.dim()) {
    case 2: return x.unsqueeze(0).unsqueeze(0);
    case 3: return x.unsqueeze(0);
    case 4: return x;
    default: throw InvalidInput("visual_metrics: expected [H, W], [C, H, W] or [N, C, H, W]");
  }
}

torch::Tensor laplacian(const torch::Tensor& x) {
  const auto n = x.size(0) * x.size(1);
  auto flat = x.reshape({n, 1, x.size(2), x.size(3)});
  auto padded = torch::nn::functional::pad(flat, torch::nn::functional::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const auto kernel = torch::tensor({0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0}, x.options()).reshape({1, 1, 3, 3});
  return torch::conv2d(padded, kernel).reshape(x.sizes());
}

torch::Tensor crop(const torch::Tensor& x, const std::optional<transform::RegionBox>& region) {
  if (!region) return x;
  return x.slice(2, region->r0, region->r1).slice(3, region->c0, region->c1);
}

double pearson(const torch::Tensor& a, const torch::Tensor& b) {
  const auto da = a.reshape({-1}) - a.mean();
  const auto db = b.reshape({-1}) - b.mean();
  const double saa = da.pow(2).sum().item<double>();
  const double sbb = db.pow(2).sum().item<double>();
  if (saa == 0.0 || sbb == 0.0) return torch::equal(a, b) ? 1.0 : 0.0;
  return (da * db).sum().item<double>() / std::sqrt(saa * sbb);
}

double ssim(const torch::Tensor& x, const torch::Tensor& y) {
  // x, y: [N, C, h, w] already cropped
  const auto wh = std::min<int64_t>(kSsimWindow, x.size(2));
  const auto ww = std::min<int64_t>(kSsimWindow, x.size(3));
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  const auto n = x.size(0) * x.size(1);
  const auto xf = x.reshape({n, 1, x.size(2), x.size(3)});
  const auto yf = y.reshape({n, 1, y.size(2), y.size(3)});
  const auto pool = [&](const torch::Tensor& t) {
    return torch::avg_pool2d(t, {wh, ww}, {1, 1}, {0, 0}, false, true);
  };
  const auto mx = pool(xf), my = pool(yf);
  const auto vx = pool(xf * xf) - mx * mx;
  const auto vy = pool(yf * yf) - my * my;
  const auto cxy = pool(xf * yf) - mx * my;
  const auto map = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  return map.mean().item<double>();
}

}  // namespace

double psnr_from_mse(double mse) {
  require(mse >= 0.0, "psnr: mse must be >= 0");
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

VisualMetrics visual_metrics(const torch::Tensor& ref, const torch::Tensor& est,
                             const std::optional<transform::RegionBox>& region) {
  require(ref.sizes() == est.sizes(), "visual_metrics: shape mismatch");
  const auto r = as_nchw(ref).to(torch::kFloat64);
  const auto e = as_nchw(est).to(torch::kFloat64);
  if (region) require(region->within(r.size(2), r.size(3)), "visual_metrics: region is empty or outside the image");

  VisualMetrics m;
  const auto rc = crop(r, region), ec = crop(e, region);
  m.mse = (rc - ec).pow(2).mean().item<double>();
  m.psnr = psnr_from_mse(m.mse);
  m.scc = pearson(crop(laplacian(r), region), crop(laplacian(e), region));
  m.ssim = ssim(rc, ec);
  return m;
}

double sisdr(const torch::Tensor& ref, const torch::Tensor& est) {
  require(ref.numel() == est.numel(), "sisdr: length mismatch");
  const auto r = ref.reshape({-1}).to(torch::kFloat64);
  const auto e = est.reshape({-1}).to(torch::kFloat64);
  const double rr = r.dot(r).item<double>();
  require(rr > 0.0, "sisdr: reference is zero");
  const auto s = (e.dot(r).item<double>() / rr) * r;
  const double signal = s.dot(s).item<double>();
  const double noise = (e - s).pow(2).sum().item<double>();
  if (noise == 0.0) return signal > 0.0 ? kSisdrCap : -kSisdrCap;
  if (signal == 0.0) return -kSisdrCap;
  return std::clamp(10.0 * std::log10(signal / noise), -kSisdrCap, kSisdrCap);
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<int64_t>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (const auto v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (const auto v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "sequence_id,condition,metric,value\n";
  out << std::setprecision(10);
  for (const auto& r : rows) out << r.sequence_id << ',' << r.condition << ',' << r.metric << ',' << r.value << '\n';
  train::write_file_atomic(path, out.str());
}

}  // namespace vqmd::eval
