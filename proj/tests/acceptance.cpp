// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only if all pass.
//
//   vqmd_acceptance [--workdir DIR] [--report FILE] [criterion numbers...]
//
// With --workdir, trained models are cached there and reused by later runs.
// With --report, the result lines are also written to FILE.

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "vqmd/common/error.hpp"
#include "vqmd/eval/metrics.hpp"
#include "vqmd/eval/ot.hpp"
#include "vqmd/eval/probes.hpp"
#include "vqmd/eval/regression.hpp"
#include "vqmd/eval/swap_protocol.hpp"
#include "vqmd/features/synthetic.hpp"
#include "vqmd/model/elbo.hpp"
#include "vqmd/model/gaussian.hpp"
#include "vqmd/model/mdvae.hpp"
#include "vqmd/train/checkpoint.hpp"
#include "vqmd/train/tensor_file.hpp"
#include "vqmd/train/trainer.hpp"
#include "vqmd/transform/corruption.hpp"
#include "vqmd/transform/latent_ops.hpp"
#include "vqmd/vq/codebook.hpp"

namespace fs = std::filesystem;
using namespace vqmd;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failed.push_back(what);
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::optional<fs::path> g_workdir;

// ---------------------------------------------------------------------------
// Model cache

model::MDVAE cached_mdvae(const std::string& name, const std::function<train::Stage2Result()>& fit) {
  if (g_workdir && fs::exists(*g_workdir / name / "manifest.json")) {
    std::cout << "  (reusing " << (*g_workdir / name).string() << ")\n";
    return train::mdvae_from_checkpoint(train::load_checkpoint(*g_workdir / name));
  }
  auto r = fit();
  if (g_workdir) train::save_checkpoint(train::mdvae_checkpoint(r.model, static_cast<int64_t>(r.log.size()), r.log),
                                        *g_workdir / name);
  return r.model;
}

vq::VQVAE cached_vq(const std::string& name, const std::function<train::Stage1Result()>& fit) {
  if (g_workdir && fs::exists(*g_workdir / name / "manifest.json")) {
    std::cout << "  (reusing " << (*g_workdir / name).string() << ")\n";
    return train::vq_from_checkpoint(train::load_checkpoint(*g_workdir / name));
  }
  auto r = fit();
  if (g_workdir) train::save_checkpoint(train::vq_checkpoint(r.model, static_cast<int64_t>(r.log.size()), r.log),
                                        *g_workdir / name);
  return r.model;
}

// ---------------------------------------------------------------------------
// 1. KL correctness

Outcome kl_correctness() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto kl = [](std::vector<double> mq, std::vector<double> vq, std::vector<double> mp, std::vector<double> vp) {
    const model::DiagGaussian q{torch::tensor(mq, torch::kFloat64), torch::log(torch::tensor(vq, torch::kFloat64))};
    const model::DiagGaussian p{torch::tensor(mp, torch::kFloat64), torch::log(torch::tensor(vp, torch::kFloat64))};
    return model::kl_diag_gaussian(q, p).item<double>();
  };
  const double c0 = kl({0.0}, {1.0}, {0.0}, {1.0});
  const double c1 = kl({1.0}, {1.0}, {0.0}, {1.0});
  const double c2 = kl({0.0}, {4.0}, {0.0}, {1.0});
  const double closed = std::max({std::abs(c0), std::abs(c1 - 0.5), std::abs(c2 - 0.5 * (3.0 - std::log(4.0)))});
  o.require(closed <= 1e-9, "closed forms");
  o.require(std::abs(c2 - 0.80685) <= 5e-6, "0.80685 case");

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  double worst = 0.0;
  const int64_t dim = 3;
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<double> mq(dim), vq(dim), mp(dim), vp(dim);
    for (int64_t i = 0; i < dim; ++i) {
      mq[i] = g(rng);
      mp[i] = g(rng);
      vq[i] = std::exp(0.5 * g(rng));
      vp[i] = std::exp(0.5 * g(rng));
    }
    const double analytic = kl(mq, vq, mp, vp);
    const double mc = testing::monte_carlo_kl(mq, vq, mp, vp, 100000, 1000 + pair);
    worst = std::max(worst, std::abs(mc - analytic) / analytic);
  }
  o.require(worst < 0.01, "Monte-Carlo agreement");
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime");
  o.detail << "closed-form error " << fmt(closed) << ", worst MC relative error over 100 pairs " << fmt(worst)
           << ", " << fmt(secs, 3) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Gradient check

Outcome gradient_check() {
  Outcome o;
  const auto t0 = Clock::now();
  torch::manual_seed(11);
  const auto cfg = model::ModelConfig::tiny();
  model::MDVAE net(cfg);
  net->to(torch::kFloat64);
  const auto x_a = torch::randn({2, cfg.T_train, cfg.d_a}, torch::kFloat64);
  const auto x_v = torch::randn({2, cfg.T_train, cfg.d_v}, torch::kFloat64);
  model::NoiseSource noise(5);
  const auto loss = [&] {
    noise.reset();
    return model::elbo(net, x_a, x_v, noise).losses.total();
  };
  std::vector<std::pair<std::string, torch::Tensor>> params;
  for (const auto& p : net->named_parameters()) params.emplace_back(p.key(), p.value());
  const auto r = testing::finite_difference_check(params, loss);
  o.require(r.max_rel_error < 1e-4, "relative error");
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, "runtime");
  o.detail << r.entries << " entries, max relative error " << fmt(r.max_rel_error) << " (" << r.worst << "), "
           << fmt(secs, 3) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Structural gradients and causality

Outcome structural_gradients() {
  Outcome o;
  torch::manual_seed(12);
  const auto cfg = model::ModelConfig::tiny();
  model::MDVAE net(cfg);
  net->to(torch::kFloat64);
  const int64_t T = 6;
  const auto x_a = torch::randn({2, T, cfg.d_a}, torch::kFloat64);
  const auto x_v = torch::randn({2, T, cfg.d_v}, torch::kFloat64);
  model::NoiseSource noise(3);
  const auto r = model::elbo(net, x_a, x_v, noise);
  const auto g_av = torch::autograd::grad({r.losses.term("recon_a")}, {r.trace.z_v}, {}, true, false, true);
  const auto g_va = torch::autograd::grad({r.losses.term("recon_v")}, {r.trace.z_a}, {}, true, false, true);
  const auto zero = [](const torch::Tensor& g) { return !g.defined() || g.abs().max().item<double>() == 0.0; };
  o.require(zero(g_av[0]), "d recon_a / d z_v");
  o.require(zero(g_va[0]), "d recon_v / d z_a");

  // causality: perturb frames after t with w held fixed
  torch::NoGradGuard no_grad;
  const auto e = net->embed(x_a, x_v);
  const auto w = net->infer_w(e).mean;
  const auto base = net->infer_dynamics(e, w, nullptr, model::SampleMode::Mean);
  int64_t checked = 0;
  for (int64_t t = 0; t + 1 < T; ++t) {
    auto xa = x_a.clone(), xv = x_v.clone();
    xa.slice(1, t + 1).add_(torch::randn_like(xa.slice(1, t + 1)));
    xv.slice(1, t + 1).add_(torch::randn_like(xv.slice(1, t + 1)));
    const auto tr = net->infer_dynamics(net->embed(xa, xv), w, nullptr, model::SampleMode::Mean);
    const bool same = torch::equal(tr.q_av.mean.slice(1, 0, t + 1), base.q_av.mean.slice(1, 0, t + 1)) &&
                      torch::equal(tr.q_av.log_var.slice(1, 0, t + 1), base.q_av.log_var.slice(1, 0, t + 1));
    o.require(same, "z_av posterior at t <= " + std::to_string(t) + " moved");
    ++checked;
  }
  o.detail << "cross-modal decoder gradients identically zero; z_av posterior unchanged by future frames at "
           << checked << " cut points";
  return o;
}

// ---------------------------------------------------------------------------
// 4. VQ properties

Outcome vq_properties() {
  Outcome o;
  const auto t0 = Clock::now();
  torch::manual_seed(13);
  vq::Codebook cb(512, 16);
  const auto grid = torch::randn({8, 16, 8, 8});
  const auto out = cb->quantize(grid);
  const auto again = cb->quantize(out.quantized.detach());
  o.require(torch::equal(again.quantized, out.quantized) && torch::equal(again.indices, out.indices), "idempotence");

  const auto rows = grid.permute({0, 2, 3, 1}).reshape({-1, 16}).to(torch::kFloat64);
  const auto codes = cb->vectors().to(torch::kFloat64);
  const auto idx = out.indices.reshape({-1});
  int64_t violations = 0;
  for (int64_t n = 0; n < rows.size(0); ++n) {
    const auto d = (codes - rows[n]).pow(2).sum(1);
    if (d[idx[n].item<int64_t>()].item<double>() > d.min().item<double>() + 1e-9) ++violations;
  }
  o.require(violations == 0, "nearest-neighbour optimality");

  const auto cont = torch::randn({3, 16, 4, 4}, torch::requires_grad());
  auto q = cb->quantize(cont).quantized;
  q.retain_grad();
  (torch::cos(q) * torch::randn_like(q)).sum().backward();
  o.require(torch::equal(cont.grad(), q.grad()), "straight-through identity");

  vq::Codebook ema(3, 4);
  const auto clusters = torch::cat({torch::randn({7, 4}) + 3.0, torch::randn({5, 4}), torch::randn({9, 4}) - 3.0});
  const auto assign = torch::cat({torch::zeros({7}, torch::kInt64), torch::ones({5}, torch::kInt64),
                                  torch::full({9}, 2, torch::kInt64)});
  for (int i = 0; i < 10000; ++i) ema->ema_update(assign, clusters);
  double ema_err = 0.0;
  for (int64_t k = 0; k < 3; ++k) {
    const auto members = clusters.index({assign == k});
    ema_err = std::max(ema_err, testing::max_abs_diff(ema->vectors()[k], members.mean(0)));
  }
  o.require(ema_err < 1e-3, "EMA convergence");
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime");
  o.detail << "K=512 exhaustive check over " << rows.size(0) << " vectors, " << violations
           << " violations; EMA error after 1e4 updates " << fmt(ema_err) << ", " << fmt(secs, 3) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Overfit smoke

double term_of(const train::LossRecord& r, const std::string& name) {
  for (const auto& [n, v] : r.terms) {
    if (n == name) return v;
  }
  throw std::runtime_error("missing loss term " + name);
}

Outcome overfit_smoke() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto raw = features::generate_synthetic(features::SyntheticFactorSpec::raw_like(8, 8, 31));
  train::TrainConfig s1;
  s1.stage = 1;
  s1.seed = 31;
  s1.deterministic = true;
  for (const auto m : {vq::Modality::Visual, vq::Modality::Audio}) {
    const auto frames = train::stack_frames(raw.sequences, m);
    const auto cfg = m == vq::Modality::Visual ? vq::VQConfig::visual_small() : vq::VQConfig::audio_small();
    const auto r = train::train_stage1(cfg, frames, s1);
    const double early = term_of(r.log.at(9), "recon");
    const double last = term_of(r.log.back(), "recon");
    o.require(last < 0.1 * early, "stage 1 " + vq::to_string(m));
    o.detail << "stage 1 " << vq::to_string(m) << " (" << frames.size(0) << " frames, " << r.log.size()
             << " steps): recon " << fmt(early) << " -> " << fmt(last) << " (" << fmt(100 * last / early, 3) << "%); ";
  }

  auto spec = features::SyntheticFactorSpec{};
  spec.n_sequences = 4;
  spec.seed = 32;
  const auto corpus = features::generate_synthetic(spec);
  const auto data = train::stack_sequences(corpus.sequences);
  const auto cfg = model::ModelConfig::desk(spec.d_a, spec.d_v);
  train::TrainConfig s2;
  s2.seed = 32;
  s2.deterministic = true;
  s2.batch_size = 4;
  s2.max_steps = 0;
  auto init = train::train_stage2(cfg, data, s2);
  const auto before = train::reconstruction_error(init.model, data);
  s2.max_steps = 5000;
  auto fitted = train::train_stage2(cfg, data, s2);
  const auto after = train::reconstruction_error(fitted.model, data);
  const double b = before.audio + before.visual, a = after.audio + after.visual;
  o.require(a < 0.05 * b, "stage 2");
  const double secs = seconds_since(t0);
  o.require(secs < 3600.0, "runtime");
  o.detail << "stage 2 (4 sequences, 5000 steps): feature MSE " << fmt(b) << " -> " << fmt(a) << " ("
           << fmt(100 * a / b, 3) << "%); " << fmt(secs, 4) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 6 and 7. Disentanglement and swap transfer on the default corpus

// Stage-2 budget for the default-corpus benchmark; 3000 steps left the dynamical latents entangled.
constexpr int64_t kBenchmarkSteps = 15000;

struct Benchmark {
  features::SyntheticCorpus corpus;
  model::MDVAE model{nullptr};
  train::Stage2Data data;
  model::LatentBundle latents;  // batched over sequences
};

Benchmark& benchmark() {
  static std::optional<Benchmark> b;
  if (b) return *b;
  b.emplace();
  auto spec = features::SyntheticFactorSpec{};
  spec.seed = 2024;
  b->corpus = features::generate_synthetic(spec);
  b->data = train::stack_sequences(b->corpus.sequences);
  const auto cfg = model::ModelConfig::desk(spec.d_a, spec.d_v);
  b->model = cached_mdvae("benchmark-mdvae", [&] {
    train::TrainConfig t;
    t.seed = 2024;
    t.deterministic = true;
    t.max_steps = kBenchmarkSteps;
    const auto t0 = Clock::now();
    auto r = train::train_stage2(cfg, b->data, t);
    std::cout << "  trained benchmark model: " << r.log.size() << " steps, final loss " << fmt(r.log.back().total)
              << ", " << fmt(seconds_since(t0), 4) << " s\n";
    return r;
  });
  b->model->eval();
  b->latents = transform::analyze(b->model, b->data.x_a, b->data.x_v);
  return *b;
}

torch::Tensor frames_of(const torch::Tensor& z) { return z.reshape({-1, z.size(2)}); }

torch::Tensor factor_frames(const std::vector<features::AVFeatureSequence>& seqs, char which, int64_t begin,
                            int64_t end) {
  std::vector<torch::Tensor> rows;
  for (int64_t i = begin; i < end; ++i) {
    const auto& f = *seqs[static_cast<size_t>(i)].factors;
    rows.push_back(which == 'c' ? f.c : which == 'a' ? f.a : f.v);
  }
  return torch::cat(rows, 0).to(torch::kFloat64);
}

Outcome disentanglement() {
  Outcome o;
  const auto t0 = Clock::now();
  auto& b = benchmark();
  const auto& seqs = b.corpus.sequences;
  const auto N = static_cast<int64_t>(seqs.size());
  const auto T = b.data.x_v.size(1);
  const auto n_classes = b.corpus.spec.n_classes;
  auto labels = torch::empty({N}, torch::kInt64);
  for (int64_t i = 0; i < N; ++i) labels[i] = seqs[static_cast<size_t>(i)].factors->s_cls;

  eval::ProbeOptions po;
  po.seed = 7;
  const auto w_probe =
      eval::train_probe(b.latents.w, labels, torch::Tensor(), n_classes, eval::SplitKind::PersonDependent, po);
  o.require(w_probe.accuracy >= 0.9, "static class from w");
  o.detail << "class accuracy from w " << fmt(w_probe.accuracy, 3);

  const auto frame_labels = labels.repeat_interleave(T);
  const auto frame_groups = torch::arange(N, torch::kInt64).repeat_interleave(T);
  const auto counts = torch::bincount(labels, {}, n_classes);
  const double chance = std::max(1.0 / static_cast<double>(n_classes), counts.max().item<double>() / N);
  const std::map<std::string, torch::Tensor> dynamic{{"z_av", b.latents.z_av}, {"z_a", b.latents.z_a},
                                                     {"z_v", b.latents.z_v}};
  for (const auto& [name, z] : dynamic) {
    const auto r = eval::train_probe(frames_of(z), frame_labels, frame_groups, n_classes,
                                     eval::SplitKind::PersonIndependent, po);
    o.require(r.accuracy <= chance + 0.15, "static class leaks into " + name);
    o.detail << ", from " << name << " " << fmt(r.accuracy, 3);
  }
  o.detail << " (chance " << fmt(chance, 3) << ")";

  // ridge R^2 on a 70/30 split by sequence
  const int64_t split = (N * 7) / 10;
  const auto r2 = [&](const torch::Tensor& z, char factor) {
    const auto ztr = frames_of(z.slice(0, 0, split)).to(torch::kFloat64);
    const auto zte = frames_of(z.slice(0, split, N)).to(torch::kFloat64);
    return eval::ridge_r2(ztr, factor_frames(seqs, factor, 0, split), zte, factor_frames(seqs, factor, split, N), 1e-3);
  };
  const double c_av = r2(b.latents.z_av, 'c'), c_a = r2(b.latents.z_a, 'c'), c_v = r2(b.latents.z_v, 'c');
  o.require(c_av >= 0.7, "shared factor from z_av");
  o.require(c_a <= 0.3 && c_v <= 0.3, "shared factor from specific latents");
  const double a_a = r2(b.latents.z_a, 'a'), a_av = r2(b.latents.z_av, 'a'), a_v = r2(b.latents.z_v, 'a');
  const double v_v = r2(b.latents.z_v, 'v'), v_av = r2(b.latents.z_av, 'v'), v_a = r2(b.latents.z_a, 'v');
  o.require(a_a >= 0.6 && a_av < 0.6 && a_v < 0.6, "audio-specific factor");
  o.require(v_v >= 0.6 && v_av < 0.6 && v_a < 0.6, "visual-specific factor");
  o.detail << "; R2 shared from z_av/z_a/z_v " << fmt(c_av, 3) << "/" << fmt(c_a, 3) << "/" << fmt(c_v, 3)
           << "; audio-specific from z_a/z_av/z_v " << fmt(a_a, 3) << "/" << fmt(a_av, 3) << "/" << fmt(a_v, 3)
           << "; visual-specific from z_v/z_av/z_a " << fmt(v_v, 3) << "/" << fmt(v_av, 3) << "/" << fmt(v_a, 3);
  const double secs = seconds_since(t0);
  o.require(secs < 7200.0, "runtime");
  o.detail << "; " << fmt(secs, 4) << " s";
  return o;
}

Outcome swap_transfer() {
  Outcome o;
  auto& b = benchmark();
  const auto& seqs = b.corpus.sequences;
  const auto N = static_cast<int64_t>(seqs.size());
  const auto n_classes = b.corpus.spec.n_classes;

  // observation-space class probe on sequence-averaged features
  const auto summary = [](const torch::Tensor& x_a, const torch::Tensor& x_v) {
    return torch::cat({x_a.mean(0), x_v.mean(0)}).to(torch::kFloat32);
  };
  std::vector<torch::Tensor> rows;
  auto labels = torch::empty({N}, torch::kInt64);
  for (int64_t i = 0; i < N; ++i) {
    const auto& s = seqs[static_cast<size_t>(i)];
    rows.push_back(summary(s.x_a, s.x_v));
    labels[i] = s.factors->s_cls;
  }
  const auto X = torch::stack(rows);
  eval::Probe probe(eval::ProbeKind::MLR, X.size(1), n_classes);
  eval::ProbeOptions po;
  po.seed = 3;
  probe.fit(X, labels, po);
  const double probe_train_acc = eval::accuracy(labels, probe.predict(X));

  const auto extractor = eval::fit_factor_extractor(seqs);
  const auto n_shared = seqs.front().factors->c.size(1);

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int64_t> pick(0, N - 1);
  int64_t agree = 0, differing = 0, agree_differing = 0;
  double pcc_sum = 0.0;
  const int64_t pairs = 100;
  for (int64_t p = 0; p < pairs; ++p) {
    const auto donor = pick(rng);
    auto recipient = pick(rng);
    while (recipient == donor) recipient = pick(rng);
    const auto& A = seqs[static_cast<size_t>(donor)];
    const auto& B = seqs[static_cast<size_t>(recipient)];
    const auto ba = transform::analyze(b.model, A.x_a, A.x_v);
    const auto bb = transform::analyze(b.model, B.x_a, B.x_v);
    const auto out = transform::resynthesize_features(b.model, transform::swap(bb, ba, transform::SwapSpec{transform::Latent::W}));
    const auto predicted = probe.predict(summary(out.x_a, out.x_v).unsqueeze(0))[0].item<int64_t>();
    const bool hit = predicted == A.factors->s_cls;
    agree += hit;
    if (A.factors->s_cls != B.factors->s_cls) {
      ++differing;
      agree_differing += hit;
    }
    const auto track_out = extractor.extract(out.x_a, out.x_v);
    const auto track_b = extractor.extract(B.x_a, B.x_v);
    double pcc = 0.0;
    for (int64_t k = 0; k < n_shared; ++k) pcc += eval::centered_pcc(track_out.select(1, k), track_b.select(1, k));
    pcc_sum += pcc / static_cast<double>(n_shared);
  }
  const double agreement = static_cast<double>(agree) / pairs;
  const double pcc = pcc_sum / pairs;
  o.require(agreement >= 0.9, "donor class transfer");
  o.require(pcc >= 0.8, "recipient dynamics");
  o.detail << "donor-class agreement " << fmt(agreement, 3) << " over " << pairs << " pairs ("
           << agree_differing << "/" << differing << " where classes differ; probe training accuracy "
           << fmt(probe_train_acc, 3) << "), recipient shared-dynamics PCC " << fmt(pcc, 3);
  return o;
}

// ---------------------------------------------------------------------------
// 8. Denoising ordering

Outcome denoising_ordering() {
  Outcome o;
  const auto t0 = Clock::now();
  // held-out sequences must share the corpus seed, which fixes the observation maps
  auto all = features::generate_synthetic(features::SyntheticFactorSpec::raw_like(250, 30, 808));
  features::SyntheticCorpus train_corpus{all.spec, {}}, test_corpus{all.spec, {}};
  for (size_t i = 0; i < all.sequences.size(); ++i) {
    if (i < 200) {
      train_corpus.sequences.push_back(all.sequences[i]);
    } else {
      test_corpus.sequences.push_back(all.sequences[i].slice(0, transform::kCorruptionFrames));
    }
  }

  train::TrainConfig s1;
  s1.stage = 1;
  s1.seed = 808;
  s1.deterministic = true;
  auto audio = cached_vq("denoise-vq-audio", [&] {
    return train::train_stage1(vq::VQConfig::audio_small(), train::stack_frames(train_corpus.sequences, vq::Modality::Audio), s1);
  });
  auto visual = cached_vq("denoise-vq-visual", [&] {
    return train::train_stage1(vq::VQConfig::visual_small(),
                               train::stack_frames(train_corpus.sequences, vq::Modality::Visual), s1);
  });
  audio->eval();
  visual->eval();
  const auto encoded = train::stack_sequences(train::encode_with_vq(train_corpus.sequences, audio, visual));

  train::TrainConfig s2;
  s2.seed = 808;
  s2.deterministic = true;
  auto cfg = model::ModelConfig::desk(vq::VQConfig::audio_small().feature_dim(), vq::VQConfig::visual_small().feature_dim());
  auto multimodal = cached_mdvae("denoise-mdvae", [&] { return train::train_stage2(cfg, encoded, s2); });
  auto ablated_cfg = cfg;
  ablated_cfg.modalities = model::Modalities::VisualOnly;
  auto ablated = cached_mdvae("denoise-mdvae-visual-only", [&] {
    return train::train_stage2(ablated_cfg, train::Stage2Data{torch::Tensor(), encoded.x_v}, s2);
  });
  multimodal->eval();
  ablated->eval();

  const auto side = features::SyntheticFactorSpec::kImageSide;
  const std::vector<double> variances{0.05, 0.1, 0.25, 0.5, 1.0};
  const auto central = torch::indexing::Slice(transform::kFirstCorrupted, transform::kLastCorrupted + 1);
  for (const auto& region : {transform::RegionBox::mouth(side, side), transform::RegionBox::eyes(side, side)}) {
    o.detail << region.name << " PSNR multimodal/ablation:";
    for (const double var : variances) {
      double mm = 0.0, ab = 0.0;
      model::NoiseSource noise(static_cast<uint64_t>(var * 1000) + (region.name == "mouth" ? 1 : 2));
      for (const auto& s : test_corpus.sequences) {
        const auto clean = s.x_v.reshape({s.length(), 1, side, side});
        const auto noisy = transform::corrupt(clean, region, var, noise);
        const auto out_mm = transform::denoise(noisy, s.x_a, multimodal, audio, visual);
        const auto out_ab = transform::denoise(noisy, torch::Tensor(), ablated, audio, visual);
        mm += eval::visual_metrics(clean.index({central}), out_mm.index({central}), region).psnr;
        ab += eval::visual_metrics(clean.index({central}), out_ab.index({central}), region).psnr;
      }
      const auto n = static_cast<double>(test_corpus.sequences.size());
      mm /= n;
      ab /= n;
      if (region.name == "mouth") o.require(mm >= ab, "mouth variance " + fmt(var));
      o.detail << " " << fmt(var) << ":" << fmt(mm, 4) << "/" << fmt(ab, 4);
    }
    o.detail << "; ";
  }
  o.detail << test_corpus.sequences.size() << " sequences, " << fmt(seconds_since(t0), 4) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Protocol arithmetic

Outcome protocol_arithmetic() {
  Outcome o;
  const auto mlr = eval::Probe(eval::ProbeKind::MLR, 84, 8).n_params();
  o.require(mlr == 680, "MLR parameter count");

  const auto track = torch::tensor({0.2, -0.1, 0.7, 0.4, -0.3, 0.0}, torch::kFloat64);
  const double pcc_offset = eval::centered_pcc(track, track + 1.5);
  const double mae_offset = eval::mean_absolute_error(track, track + 1.5);
  const double pcc_neg = eval::centered_pcc(track, -(track - track.mean()));
  o.require(std::abs(pcc_offset - 1.0) < 1e-12 && std::abs(mae_offset - 1.5) < 1e-12, "offset tracks");
  o.require(std::abs(pcc_neg + 1.0) < 1e-12, "negated track");

  torch::manual_seed(14);
  const auto ref = torch::randn({1000}, torch::kFloat64);
  const auto est = ref + 0.5 * torch::randn({1000}, torch::kFloat64);
  const double base = eval::sisdr(ref, est);
  double drift = 0.0;
  for (double l : {1e-3, 0.5, 2.0, 1e3}) drift = std::max(drift, std::abs(eval::sisdr(ref, l * est) - base));
  o.require(drift <= 1e-9, "SI-SDR scale invariance");
  const double sisdr0 = eval::sisdr(torch::tensor({1.0, 0.0}), torch::tensor({1.0, 1.0}));
  o.require(std::abs(sisdr0) < 1e-12, "SI-SDR 0 dB case");
  o.require(eval::sisdr(ref, 2.0 * ref) == eval::kSisdrCap, "SI-SDR cap");

  const double p20 = eval::psnr_from_mse(0.01), p28 = eval::psnr_from_mse(0.0016);
  o.require(std::abs(p20 - 20.0) < 1e-12, "PSNR 20 dB");
  o.require(std::abs(p28 - 10.0 * std::log10(625.0)) < 1e-12, "PSNR 27.96 dB");
  o.require(eval::psnr_from_mse(0.0) == eval::kPsnrCap, "PSNR cap");
  o.detail << "MLR(84, 8) parameters " << mlr << "; PCC/MAE with offset 1.5: " << fmt(pcc_offset, 12) << "/"
           << fmt(mae_offset, 12) << "; SI-SDR scale drift " << fmt(drift) << " dB; PSNR(0.01) " << fmt(p20, 12)
           << ", PSNR(0.0016) " << fmt(p28, 6);
  return o;
}

// ---------------------------------------------------------------------------
// 10. OT adaptation

Outcome ot_adaptation() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst_plan = 0.0, worst_map = 0.0;
  int64_t instances = 0;
  for (int trial = 0; trial < 10; ++trial) {
    torch::manual_seed(200 + trial);
    const int64_t dim = 2 + trial % 4;
    const int64_t M = 5 + trial, N = trial % 2 == 0 ? M : 20 - trial;
    const auto target = torch::randn({M, dim}, torch::kFloat64);
    const auto source = torch::randn({N, dim}, torch::kFloat64) * 1.3 + 0.7;
    const auto r = eval::ot_domain_adapt(source, target);
    o.require(r.converged, "Sinkhorn convergence");
    const double exact = testing::exact_emd(r.cost);
    worst_plan = std::max(worst_plan, std::abs(eval::transport_cost(r.plan, r.cost) - exact) / exact);
    if (M == N) {
      // with equal sizes the exact optimum is a permutation, so the barycentric map is comparable
      const double mapped = (r.mapped - target).pow(2).sum(1).mean().item<double>();
      worst_map = std::max(worst_map, std::abs(mapped - exact) / exact);
    }
    ++instances;
  }
  o.require(worst_plan < 0.05, "plan cost vs exact EMD");
  o.require(worst_map < 0.05, "barycentric-map cost vs exact EMD");

  double worst_shift = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    torch::manual_seed(300 + trial);
    const auto source = torch::randn({20, 10}, torch::kFloat64);
    const auto delta = torch::randn({10}, torch::kFloat64) * (0.3 * (trial + 1));
    const auto r = eval::ot_domain_adapt(source, source + delta);
    worst_shift = std::max(worst_shift, (r.mapped - source).norm(2, 1).max().item<double>() / delta.norm().item<double>());
  }
  o.require(worst_shift <= 0.05, "shift removal");
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime");
  o.detail << instances << " instances up to 20 points: worst plan-cost error " << fmt(worst_plan)
           << ", worst map-cost error " << fmt(worst_map) << "; shift removal worst distance / |shift| "
           << fmt(worst_shift) << "; " << fmt(secs, 3) << " s";
  return o;
}

// ---------------------------------------------------------------------------
// 11. Infrastructure

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = train::read_file(e.path());
  }
  return out;
}

Outcome infrastructure() {
  Outcome o;
  testing::TempDir dir("acceptance");

  torch::manual_seed(15);
  model::MDVAE net(model::ModelConfig::desk(32, 64));
  const auto ckpt = train::mdvae_checkpoint(net, 3, {});
  train::save_checkpoint(ckpt, dir / "a");
  const auto loaded = train::load_checkpoint(dir / "a");
  bool tensors_equal = loaded.tensors.size() == ckpt.tensors.size();
  for (const auto& [name, t] : ckpt.tensors) tensors_equal = tensors_equal && testing::bit_equal(loaded.tensors.at(name), t);
  train::save_checkpoint(loaded, dir / "b");
  o.require(tensors_equal, "checkpoint tensors bit-identical");
  o.require(directory_bytes(dir / "a") == directory_bytes(dir / "b"), "save-load-save bytes");

  auto spec = features::SyntheticFactorSpec{};
  spec.n_sequences = 8;
  spec.T = 10;
  spec.seed = 16;
  const auto data = train::stack_sequences(features::generate_synthetic(spec).sequences);
  auto cfg = model::ModelConfig::desk(spec.d_a, spec.d_v);
  cfg.T_train = 10;
  train::TrainConfig t;
  t.seed = 16;
  t.deterministic = true;
  t.max_steps = 30;
  t.batch_size = 4;
  const auto r1 = train::train_stage2(cfg, data, t);
  const auto r2 = train::train_stage2(cfg, data, t);
  bool logs_equal = r1.log.size() == r2.log.size();
  for (size_t i = 0; logs_equal && i < r1.log.size(); ++i) {
    logs_equal = r1.log[i].total == r2.log[i].total && r1.log[i].terms == r2.log[i].terms;
  }
  o.require(logs_equal, "deterministic stage-2 loss log");
  const auto frames = train::stack_frames(features::generate_synthetic(features::SyntheticFactorSpec::raw_like(2, 8, 17)).sequences,
                                          vq::Modality::Visual);
  train::TrainConfig t1;
  t1.stage = 1;
  t1.seed = 17;
  t1.deterministic = true;
  t1.max_steps = 20;
  t1.batch_size = 8;
  const auto v1 = train::train_stage1(vq::VQConfig::visual_small(), frames, t1);
  const auto v2 = train::train_stage1(vq::VQConfig::visual_small(), frames, t1);
  bool s1_equal = v1.log.size() == v2.log.size();
  for (size_t i = 0; s1_equal && i < v1.log.size(); ++i) s1_equal = v1.log[i].terms == v2.log[i].terms;
  o.require(s1_equal, "deterministic stage-1 loss log");

  std::ostringstream out, err;
  const auto code = [&](const std::vector<std::string>& args) {
    out.str("");
    err.str("");
    return cli::dispatch(args, out, err);
  };
  const int help = code({"--help"});
  const bool help_stdout = !out.str().empty();
  const int typo = code({"trian-vq"});
  const bool suggests = err.str().find("train-vq") != std::string::npos;
  const int bad_config = code({"gen-data", "--config", (dir / "missing.json").string(), "--out", (dir / "x").string()});
  const int ok = code({"gen-data", "--override", "corpus.n_sequences=2", "--out", (dir / "c").string()});
  const int clobber = code({"gen-data", "--override", "corpus.n_sequences=2", "--out", (dir / "c").string()});
  o.require(help == 0 && help_stdout, "--help exit 0 on stdout");
  o.require(typo == 1 && suggests, "unknown command exit 1 with suggestion");
  o.require(bad_config == 2, "unreadable config exit 2");
  o.require(ok == 0 && clobber == 2, "refuse to clobber without --overwrite");
  o.detail << "checkpoint of " << ckpt.tensors.size() << " tensors bit-exact and byte-stable; "
           << r1.log.size() << "-step stage-2 and " << v1.log.size()
           << "-step stage-1 logs identical across runs; exit codes help/typo/config/clobber = " << help << "/"
           << typo << "/" << bad_config << "/" << clobber;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  std::optional<fs::path> report_path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      g_workdir = fs::path(argv[++i]);
      fs::create_directories(*g_workdir);
    } else if (a == "--report" && i + 1 < argc) {
      report_path = fs::path(argv[++i]);
    } else {
      wanted.insert(std::stoi(a));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"KL correctness", kl_correctness},
      {"gradient check", gradient_check},
      {"structural gradients", structural_gradients},
      {"VQ properties", vq_properties},
      {"overfit smoke", overfit_smoke},
      {"disentanglement benchmark", disentanglement},
      {"swap transfer", swap_transfer},
      {"denoising ordering", denoising_ordering},
      {"protocol arithmetic", protocol_arithmetic},
      {"OT adaptation", ot_adaptation},
      {"infrastructure", infrastructure},
  };
  int failures = 0;
  std::ostringstream report;
  const auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    report << line << "\n";
  };
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto& [name, run] = criteria[i];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.failed.push_back(std::string("threw: ") + e.what());
    }
    failures += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail.str();
    if (!o.failed.empty()) {
      line << " | failed:";
      for (const auto& f : o.failed) line << " [" << f << "]";
    }
    emit(line.str());
  }
  emit(failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed");
  if (report_path) train::write_file_atomic(*report_path, report.str());
  return failures == 0 ? 0 : 1;
}
