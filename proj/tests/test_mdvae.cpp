#include "doctest_torch.hpp"

#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "vqmd/common/error.hpp"
#include "vqmd/model/elbo.hpp"
#include "vqmd/model/gaussian.hpp"
#include "vqmd/model/mdvae.hpp"

using namespace vqmd;
using namespace vqmd::model;
using vqmd::testing::max_abs_diff;

namespace {

DiagGaussian gaussian(const std::vector<double>& mean, const std::vector<double>& var) {
  return {torch::tensor(mean, torch::kFloat64), torch::log(torch::tensor(var, torch::kFloat64))};
}

struct TinySetup {
  MDVAE model{nullptr};
  torch::Tensor x_a, x_v;
};

TinySetup tiny(int64_t B = 2, Modalities m = Modalities::Both) {
  torch::manual_seed(7);
  auto cfg = ModelConfig::tiny();
  cfg.modalities = m;
  TinySetup s;
  s.model = MDVAE(cfg);
  s.model->to(torch::kFloat64);
  s.x_a = torch::randn({B, cfg.T_train, cfg.d_a}, torch::kFloat64);
  s.x_v = torch::randn({B, cfg.T_train, cfg.d_v}, torch::kFloat64);
  return s;
}

}  // namespace

TEST_CASE("kl: closed forms") {
  const auto p = gaussian({0.0}, {1.0});
  CHECK(kl_diag_gaussian(p, p).item<double>() == 0.0);
  CHECK(kl_diag_gaussian(gaussian({1.0}, {1.0}), p).item<double>() == doctest::Approx(0.5).epsilon(1e-12));
  const double expected = 0.5 * (4.0 - 1.0 - std::log(4.0));
  CHECK(kl_diag_gaussian(gaussian({0.0}, {4.0}), p).item<double>() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.80685).epsilon(1e-5));
}

TEST_CASE("kl: non-negative and matching a Monte-Carlo estimate") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> mq(3), vq(3), mp(3), vp(3);
    for (size_t i = 0; i < 3; ++i) {
      mq[i] = g(rng);
      mp[i] = g(rng);
      vq[i] = std::exp(0.5 * g(rng));
      vp[i] = std::exp(0.5 * g(rng));
    }
    const DiagGaussian q{torch::tensor(mq, torch::kFloat64), torch::log(torch::tensor(vq, torch::kFloat64))};
    const DiagGaussian p{torch::tensor(mp, torch::kFloat64), torch::log(torch::tensor(vp, torch::kFloat64))};
    const double analytic = kl_diag_gaussian(q, p).item<double>();
    CHECK(analytic >= 0.0);
    const double mc = vqmd::testing::monte_carlo_kl(mq, vq, mp, vp, 100000, 100 + trial);
    CHECK(std::abs(mc - analytic) / analytic < 0.01);
  }
}

TEST_CASE("gaussian: log-variance clamp and reparameterisation") {
  const DiagGaussian wide{torch::zeros({2}), torch::tensor({-100.0f, 100.0f})};
  CHECK(wide.log_var[0].item<double>() == kLogVarMin);
  CHECK(wide.log_var[1].item<double>() == kLogVarMax);
  CHECK(reparameterize(gaussian({0.0}, {1.0}), torch::zeros({1}, torch::kFloat64)).item<double>() == 0.0);
  CHECK(reparameterize(gaussian({2.0}, {0.25}), torch::ones({1}, torch::kFloat64)).item<double>() ==
        doctest::Approx(2.5));
  const DiagGaussian narrow{torch::tensor({1.5}, torch::kFloat64), torch::tensor({-1e9}, torch::kFloat64)};
  CHECK(reparameterize(narrow, torch::ones({1}, torch::kFloat64)).item<double>() == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("noise source: same seed, same draws; reset rewinds") {
  NoiseSource a(5), b(5);
  const auto x = a.normal({4}, torch::kFloat32);
  CHECK(torch::equal(x, b.normal({4}, torch::kFloat32)));
  a.reset();
  CHECK(torch::equal(x, a.normal({4}, torch::kFloat32)));
}

TEST_CASE("embedding: audio identity and visual embedding width") {
  auto s = tiny();
  const auto e = s.model->embed(s.x_a, s.x_v);
  CHECK(torch::equal(e.r_a, s.x_a));
  CHECK(e.r_v.size(2) == s.model->config().r_v_dim());
  const auto again = s.model->embed(torch::zeros_like(s.x_a), torch::zeros_like(s.x_v));
  CHECK(torch::equal(again.r_v, s.model->embed(torch::zeros_like(s.x_a), torch::zeros_like(s.x_v)).r_v));
  CHECK_THROWS_AS(s.model->embed(s.x_a, torch::randn({2, 3, 5}, torch::kFloat64)), InvalidInput);
}

TEST_CASE("full-size dimensions") {
  torch::NoGradGuard guard;
  MDVAE model(ModelConfig::full());
  const auto x_a = torch::randn({1, 4, 512});
  const auto x_v = torch::randn({1, 4, 2048});
  const auto e = model->embed(x_a, x_v);
  CHECK(e.r_a.size(2) == 512);
  CHECK(e.r_v.size(2) == 512);
  const auto q_w = model->infer_w(e);
  CHECK(q_w.mean.size(1) == 84);
  CHECK(q_w.log_var.size(1) == 84);
  const auto tr = model->infer_dynamics(e, q_w.mean, nullptr, SampleMode::Mean);
  CHECK(tr.z_av.sizes() == torch::IntArrayRef({1, 4, 16}));
  CHECK(tr.z_a.sizes() == torch::IntArrayRef({1, 4, 8}));
  CHECK(tr.z_v.sizes() == torch::IntArrayRef({1, 4, 8}));
  CHECK(tr.h_av.size(2) == 128);
  CHECK(model->decode_audio(q_w.mean, tr.z_av, tr.z_a).size(2) == 512);
  CHECK(model->decode_visual(q_w.mean, tr.z_av, tr.z_v).size(2) == 2048);
}

TEST_CASE("infer_w: deterministic and equivariant to batch permutation") {
  auto s = tiny(3);
  const auto e = s.model->embed(s.x_a, s.x_v);
  const auto q1 = s.model->infer_w(e);
  const auto q2 = s.model->infer_w(e);
  CHECK(torch::equal(q1.mean, q2.mean));
  const auto perm = torch::tensor({2, 0, 1}, torch::kInt64);
  const auto qp = s.model->infer_w(s.model->embed(s.x_a.index_select(0, perm), s.x_v.index_select(0, perm)));
  CHECK(max_abs_diff(qp.mean, q1.mean.index_select(0, perm)) < 1e-12);
  CHECK(max_abs_diff(qp.log_var, q1.log_var.index_select(0, perm)) < 1e-12);
  CHECK_THROWS_AS(s.model->infer_w(s.model->embed(s.x_a.slice(1, 0, 0), s.x_v.slice(1, 0, 0))), InvalidInput);
}

TEST_CASE("infer_dynamics: first prior is shared; frozen noise is deterministic") {
  auto s = tiny(3);
  const auto e = s.model->embed(s.x_a, s.x_v);
  const auto w = s.model->infer_w(e).mean;
  NoiseSource n1(3), n2(3);
  const auto t1 = s.model->infer_dynamics(e, w, &n1, SampleMode::Sample);
  const auto t2 = s.model->infer_dynamics(e, w, &n2, SampleMode::Sample);
  CHECK(torch::equal(t1.z_av, t2.z_av));
  CHECK(torch::equal(t1.z_v, t2.z_v));
  for (int64_t b = 1; b < 3; ++b) {
    CHECK(torch::equal(t1.p_av.mean.select(1, 0)[b], t1.p_av.mean.select(1, 0)[0]));
    CHECK(torch::equal(t1.p_a.log_var.select(1, 0)[b], t1.p_a.log_var.select(1, 0)[0]));
    CHECK(torch::equal(t1.p_v.mean.select(1, 0)[b], t1.p_v.mean.select(1, 0)[0]));
  }
  CHECK(t1.q_av.mean.sizes() == t1.p_av.mean.sizes());
}

TEST_CASE("causality: z_av posterior at t ignores frames after t (w held fixed)") {
  auto s = tiny(1);
  s.x_a = torch::randn({1, 6, 4}, torch::kFloat64);
  s.x_v = torch::randn({1, 6, 6}, torch::kFloat64);
  const auto e = s.model->embed(s.x_a, s.x_v);
  const auto w = s.model->infer_w(e).mean;
  const auto base = s.model->infer_dynamics(e, w, nullptr, SampleMode::Mean);
  for (int64_t t = 0; t < 5; ++t) {
    auto xa = s.x_a.clone(), xv = s.x_v.clone();
    xa.slice(1, t + 1).add_(torch::randn_like(xa.slice(1, t + 1)));
    xv.slice(1, t + 1).add_(torch::randn_like(xv.slice(1, t + 1)));
    const auto tr = s.model->infer_dynamics(s.model->embed(xa, xv), w, nullptr, SampleMode::Mean);
    CHECK(torch::equal(tr.q_av.mean.slice(1, 0, t + 1), base.q_av.mean.slice(1, 0, t + 1)));
    CHECK(torch::equal(tr.q_av.log_var.slice(1, 0, t + 1), base.q_av.log_var.slice(1, 0, t + 1)));
    CHECK_FALSE(torch::equal(tr.q_av.mean.select(1, t + 1), base.q_av.mean.select(1, t + 1)));
  }
}

TEST_CASE("decoders: no cross-modal path, w reaches every frame") {
  auto s = tiny(2);
  const auto& c = s.model->config();
  const auto w = torch::randn({2, c.l_w}, torch::kFloat64);
  const auto z_av = torch::randn({2, 3, c.l_av}, torch::kFloat64);
  const auto z_a = torch::randn({2, 3, c.l_a}, torch::kFloat64);
  const auto z_v = torch::randn({2, 3, c.l_v}, torch::kFloat64);

  NoiseSource noise(1);
  auto r = elbo(s.model, s.x_a, s.x_v, noise);
  const auto& tr = r.trace;
  auto g_av = torch::autograd::grad({r.losses.term("recon_a")}, {tr.z_v}, {}, true, false, true);
  CHECK((!g_av[0].defined() || g_av[0].abs().max().item<double>() == 0.0));
  auto g_va = torch::autograd::grad({r.losses.term("recon_v")}, {tr.z_a}, {}, true, false, true);
  CHECK((!g_va[0].defined() || g_va[0].abs().max().item<double>() == 0.0));

  const auto a1 = s.model->decode_audio(w, z_av, z_a);
  const auto a2 = s.model->decode_audio(w + 1.0, z_av, z_a);
  const auto v1 = s.model->decode_visual(w, z_av, z_v);
  const auto v2 = s.model->decode_visual(w + 1.0, z_av, z_v);
  CHECK((a1 - a2).abs().sum(2).min().item<double>() > 0.0);
  CHECK((v1 - v2).abs().sum(2).min().item<double>() > 0.0);
  CHECK(torch::equal(s.model->decode_visual(torch::zeros_like(w), torch::zeros_like(z_av), torch::zeros_like(z_v)),
                     s.model->decode_visual(torch::zeros_like(w), torch::zeros_like(z_av), torch::zeros_like(z_v))));
  CHECK_THROWS_AS(s.model->decode_audio(w, z_av, z_v.narrow(2, 0, 1)), InvalidInput);
}

TEST_CASE("elbo terms: KL vanishes when posteriors equal priors; recon vanishes at the means") {
  auto s = tiny(2);
  torch::NoGradGuard guard;
  const auto e = s.model->embed(s.x_a, s.x_v);
  const auto w = s.model->infer_w(e).mean;
  auto tr = s.model->infer_dynamics(e, w, nullptr, SampleMode::Mean);
  tr.q_av = tr.p_av;
  tr.q_a = tr.p_a;
  tr.q_v = tr.p_v;
  const DiagGaussian q_w = DiagGaussian::standard(w);
  const auto mean_a = s.model->decode_audio(w, tr.z_av, tr.z_a);
  const auto mean_v = s.model->decode_visual(w, tr.z_av, tr.z_v);
  const auto terms = elbo_terms(mean_a, mean_v, mean_a, mean_v, q_w, tr, 1.0);
  for (const auto* name : {"recon_a", "recon_v", "kl_w", "kl_av", "kl_a", "kl_v"}) CHECK(terms.value(name) == 0.0);
  CHECK(terms.total().item<double>() == 0.0);
}

TEST_CASE("elbo: total is the weighted sum; unit-variance log-likelihood constant") {
  auto s = tiny(2);
  NoiseSource noise(2);
  ElboOptions opt;
  opt.kl_weight = 0.3;
  const auto r = elbo(s.model, s.x_a, s.x_v, noise, opt);
  double sum = 0.0;
  for (const auto& e : r.losses.entries()) sum += e.weight * e.value.item<double>();
  CHECK(r.losses.total().item<double>() == doctest::Approx(sum).epsilon(1e-12));
  CHECK(r.losses.weight("kl_av") == 0.3);
  CHECK(r.losses.weight("recon_a") == 1.0);
  // log N(x; x, I) per frame = -(d/2) ln 2 pi, the constant dropped from recon
  const double d = 512.0;
  const auto x = torch::randn({1, 512}, torch::kFloat64);
  const double loglik = (-0.5 * (x - x).pow(2).sum() - 0.5 * d * std::log(2 * M_PI)).item<double>();
  CHECK(loglik == doctest::Approx(-(d / 2) * std::log(2 * M_PI)));
}

TEST_CASE("elbo: unimodal visual-only drops audio terms and parameters") {
  auto s = tiny(2, Modalities::VisualOnly);
  NoiseSource noise(2);
  const auto r = elbo(s.model, torch::Tensor(), s.x_v, noise);
  CHECK(r.losses.weight("recon_a") == 0.0);
  CHECK(r.losses.weight("kl_a") == 0.0);
  CHECK(r.losses.value("recon_a") == 0.0);
  for (const auto& p : s.model->named_parameters()) {
    CHECK(p.key().find("prior_a.") == std::string::npos);
    CHECK(p.key().find("posterior_a.") == std::string::npos);
    CHECK(p.key().find("audio_decoder") == std::string::npos);
  }
}

TEST_CASE("elbo: non-finite input raises a numeric error naming the block") {
  auto s = tiny(1);
  auto bad = s.x_v.clone();
  bad[0][0][0] = NAN;
  NoiseSource noise(1);
  try {
    elbo(s.model, s.x_a, bad, noise);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK_FALSE(e.where().empty());
  }
}

TEST_CASE("generate: deterministic under fixed noise; noise changes dynamics only") {
  auto s = tiny(1);
  torch::NoGradGuard guard;
  const auto w = torch::randn({1, s.model->config().l_w}, torch::kFloat64);
  NoiseSource n1(4), n2(4), n3(5);
  const auto g1 = s.model->generate(w, 5, n1);
  const auto g2 = s.model->generate(w, 5, n2);
  const auto g3 = s.model->generate(w, 5, n3);
  CHECK(torch::equal(g1.mean_a, g2.mean_a));
  CHECK(torch::equal(g1.mean_v, g2.mean_v));
  CHECK(g1.latents.z_av.sizes() == torch::IntArrayRef({1, 5, 2}));
  CHECK(g1.latents.z_a.sizes() == torch::IntArrayRef({1, 5, 2}));
  CHECK_FALSE(torch::equal(g1.latents.z_av, g3.latents.z_av));
  CHECK(torch::equal(g1.latents.w, g3.latents.w));
  CHECK_THROWS_AS(s.model->generate(w, 0, n1), InvalidInput);
}

TEST_CASE("gradient check on the tiny configuration (sampled subset)") {
  auto s = tiny(2);
  NoiseSource noise(9);
  const auto loss = [&] {
    noise.reset();
    return elbo(s.model, s.x_a, s.x_v, noise).losses.total();
  };
  std::vector<std::pair<std::string, torch::Tensor>> params;
  for (const auto& p : s.model->named_parameters()) {
    if (p.key().find("w_head") != std::string::npos || p.key().find("posterior_av") != std::string::npos ||
        p.key().find("audio_decoder") != std::string::npos) {
      params.emplace_back(p.key(), p.value());
    }
  }
  const auto r = vqmd::testing::finite_difference_check(params, loss);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-4);
}
