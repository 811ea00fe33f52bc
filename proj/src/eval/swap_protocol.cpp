#include "vqmd/eval/swap_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vqmd/common/error.hpp"

namespace vqmd::eval {

double centered_pcc(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.numel() == b.numel() && a.numel() > 0, "pcc: tracks must have equal, non-zero length");
  const auto x = a.reshape({-1}).to(torch::kFloat64), y = b.reshape({-1}).to(torch::kFloat64);
  const auto xc = x - x.mean(), yc = y - y.mean();
  const double sxx = xc.dot(xc).item<double>(), syy = yc.dot(yc).item<double>();
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return xc.dot(yc).item<double>() / std::sqrt(sxx * syy);
}

double mean_absolute_error(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.numel() == b.numel() && a.numel() > 0, "mae: tracks must have equal, non-zero length");
  return (a.reshape({-1}).to(torch::kFloat64) - b.reshape({-1}).to(torch::kFloat64)).abs().mean().item<double>();
}

AttributeExtractor fit_factor_extractor(const std::vector<features::AVFeatureSequence>& sequences, double lambda) {
  require(!sequences.empty(), "fit_factor_extractor: no sequences");
  std::vector<torch::Tensor> xs, ys;
  for (const auto& s : sequences) {
    require(s.factors.has_value(), "fit_factor_extractor: sequence " + s.id + " has no ground-truth factors");
    xs.push_back(torch::cat({s.x_a, s.x_v}, 1).to(torch::kFloat64));
    ys.push_back(torch::cat({s.factors->c, s.factors->a, s.factors->v}, 1).to(torch::kFloat64));
  }
  const auto& f = *sequences.front().factors;
  AttributeExtractor ex;
  for (int64_t k = 0; k < f.c.size(1); ++k) ex.names.push_back("c" + std::to_string(k));
  for (int64_t k = 0; k < f.a.size(1); ++k) ex.names.push_back("a" + std::to_string(k));
  for (int64_t k = 0; k < f.v.size(1); ++k) ex.names.push_back("v" + std::to_string(k));
  auto ridge = std::make_shared<RidgeModel>(fit_ridge(torch::cat(xs, 0), torch::cat(ys, 0), lambda));
  ex.extract = [ridge](const torch::Tensor& x_a, const torch::Tensor& x_v) {
    return ridge->predict(torch::cat({x_a, x_v}, 1));
  };
  return ex;
}

std::vector<AttributeScore> swap_protocol(model::MDVAE& model, const std::vector<features::AVFeatureSequence>& sequences,
                                          transform::Latent variable, const AttributeExtractor& extractor,
                                          const SwapProtocolOptions& options) {
  const auto n = static_cast<int64_t>(sequences.size());
  require(n >= 2, "swap_protocol: need at least two sequences");
  require(options.n_repeats >= 1 && options.n_recipients >= 1, "swap_protocol: counts must be >= 1");
  const auto n_b = std::min(options.n_recipients, n - 1);
  const auto n_attr = static_cast<int64_t>(extractor.names.size());

  const auto extract = [&](const torch::Tensor& x_a, const torch::Tensor& x_v, const std::string& id) {
    try {
      auto t = extractor.extract(x_a, x_v);
      require(t.dim() == 2 && t.size(1) == n_attr, "extractor returned the wrong number of attributes");
      return t;
    } catch (const std::exception& e) {
      throw InvalidInput("attribute extraction failed for sequence " + id + ": " + e.what());
    }
  };

  std::vector<AttributeScore> total(static_cast<size_t>(n_attr));
  for (int64_t k = 0; k < n_attr; ++k) total[static_cast<size_t>(k)].name = extractor.names[static_cast<size_t>(k)];

  std::mt19937_64 rng(options.seed);
  const transform::SwapSpec spec{variable};
  for (int64_t rep = 0; rep < options.n_repeats; ++rep) {
    const auto a_idx = std::uniform_int_distribution<int64_t>(0, n - 1)(rng);
    std::vector<int64_t> others;
    for (int64_t i = 0; i < n; ++i) {
      if (i != a_idx) others.push_back(i);
    }
    std::shuffle(others.begin(), others.end(), rng);
    others.resize(static_cast<size_t>(n_b));

    const auto& A = sequences[static_cast<size_t>(a_idx)];
    const auto bundle_a = transform::analyze(model, A.x_a, A.x_v);
    const auto track_a = extract(A.x_a, A.x_v, A.id);

    std::vector<AttributeScore> rep_sum(static_cast<size_t>(n_attr));
    for (const auto b_idx : others) {
      const auto& B = sequences[static_cast<size_t>(b_idx)];
      const auto bundle_b = transform::analyze(model, B.x_a, B.x_v);
      const auto out = transform::resynthesize_features(model, transform::swap(bundle_b, bundle_a, spec));
      const auto track_out = extract(out.x_a, out.x_v, B.id + "<-" + A.id);
      const auto track_b = extract(B.x_a, B.x_v, B.id);
      for (int64_t k = 0; k < n_attr; ++k) {
        auto& s = rep_sum[static_cast<size_t>(k)];
        const auto o = track_out.select(1, k);
        s.pcc_source += centered_pcc(o, track_a.select(1, k));
        s.mae_source += mean_absolute_error(o, track_a.select(1, k));
        s.pcc_recipient += centered_pcc(o, track_b.select(1, k));
        s.mae_recipient += mean_absolute_error(o, track_b.select(1, k));
      }
    }
    for (int64_t k = 0; k < n_attr; ++k) {
      auto& t = total[static_cast<size_t>(k)];
      const auto& s = rep_sum[static_cast<size_t>(k)];
      t.pcc_source += s.pcc_source / static_cast<double>(n_b);
      t.mae_source += s.mae_source / static_cast<double>(n_b);
      t.pcc_recipient += s.pcc_recipient / static_cast<double>(n_b);
      t.mae_recipient += s.mae_recipient / static_cast<double>(n_b);
    }
  }
  for (auto& t : total) {
    const auto r = static_cast<double>(options.n_repeats);
    t.pcc_source /= r;
    t.mae_source /= r;
    t.pcc_recipient /= r;
    t.mae_recipient /= r;
  }
  return total;
}

}  // namespace vqmd::eval
