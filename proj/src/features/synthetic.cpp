#include "vqmd/features/synthetic.hpp"

#include <algorithm>

#include "vqmd/common/error.hpp"
#include "vqmd/features/stft.hpp"
#include "vqmd/transform/region.hpp"

namespace vqmd::features {

namespace {

constexpr int64_t kEmbedDim = 4;
constexpr double kSinGain = 0.25;

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

torch::Tensor gaussian(std::mt19937_64& rng, std::vector<int64_t> shape, double std) {
  auto t = torch::empty(shape, torch::kFloat64);
  std::normal_distribution<double> dist(0.0, std);
  auto* p = t.data_ptr<double>();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = dist(rng);
  return t;
}

torch::Tensor random_walk(std::mt19937_64& rng, int64_t T, int64_t dim) {
  auto out = torch::empty({T, dim}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  std::uniform_real_distribution<double> start(-0.5, 0.5);
  std::normal_distribution<double> step(0.0, kFactorStepStd);
  for (int64_t k = 0; k < dim; ++k) {
    double x = start(rng);
    for (int64_t t = 0; t < T; ++t) {
      if (t > 0) x = std::clamp(x + std::clamp(step(rng), -kFactorMaxStep, kFactorMaxStep), -1.0, 1.0);
      acc[t][k] = x;
    }
  }
  return out;
}

torch::Tensor region_mask(const transform::RegionBox& box) {
  constexpr int64_t side = SyntheticFactorSpec::kImageSide;
  auto mask = torch::zeros({side, side}, torch::kFloat64);
  mask.slice(0, box.r0, box.r1).slice(1, box.c0, box.c1).fill_(1.0);
  return mask.reshape({-1});
}

const char* mode_name(SyntheticMode m) { return m == SyntheticMode::Feature ? "feature" : "raw-like"; }

}  // namespace

SyntheticFactorSpec SyntheticFactorSpec::raw_like(int64_t n_sequences, int64_t T, uint64_t seed) {
  SyntheticFactorSpec s;
  s.n_sequences = n_sequences;
  s.T = T;
  s.seed = seed;
  s.mode = SyntheticMode::RawLike;
  s.d_a = kSpectrumBins;
  s.d_v = kImageSide * kImageSide;
  s.noise_std = 0.02;
  return s;
}

void SyntheticFactorSpec::validate() const {
  require(n_sequences >= 1 && n_identities >= 1 && n_classes >= 1, "synthetic spec: counts must be >= 1");
  require(dim_shared_dyn >= 1 && dim_audio_dyn >= 1 && dim_visual_dyn >= 1, "synthetic spec: factor dims must be >= 1");
  require(d_a >= 1 && d_v >= 1 && T >= 1, "synthetic spec: observation dims and T must be >= 1");
  require(noise_std >= 0.0, "synthetic spec: noise_std must be >= 0");
  if (mode == SyntheticMode::RawLike) {
    require(d_a == kSpectrumBins && d_v == kImageSide * kImageSide,
            "synthetic spec: raw-like mode requires d_a = 65 and d_v = 256");
  }
}

void to_json(nlohmann::json& j, const SyntheticFactorSpec& s) {
  j = nlohmann::json{{"n_sequences", s.n_sequences},
                     {"n_identities", s.n_identities},
                     {"n_classes", s.n_classes},
                     {"dim_shared_dyn", s.dim_shared_dyn},
                     {"dim_audio_dyn", s.dim_audio_dyn},
                     {"dim_visual_dyn", s.dim_visual_dyn},
                     {"d_a", s.d_a},
                     {"d_v", s.d_v},
                     {"T", s.T},
                     {"noise_std", s.noise_std},
                     {"mode", mode_name(s.mode)},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticFactorSpec& s) {
  SyntheticFactorSpec d;
  s.n_sequences = j.value("n_sequences", d.n_sequences);
  s.n_identities = j.value("n_identities", d.n_identities);
  s.n_classes = j.value("n_classes", d.n_classes);
  s.dim_shared_dyn = j.value("dim_shared_dyn", d.dim_shared_dyn);
  s.dim_audio_dyn = j.value("dim_audio_dyn", d.dim_audio_dyn);
  s.dim_visual_dyn = j.value("dim_visual_dyn", d.dim_visual_dyn);
  s.T = j.value("T", d.T);
  s.noise_std = j.value("noise_std", d.noise_std);
  s.seed = j.value("seed", d.seed);
  const auto mode = j.value("mode", std::string("feature"));
  if (mode == "feature") {
    s.mode = SyntheticMode::Feature;
    s.d_a = j.value("d_a", d.d_a);
    s.d_v = j.value("d_v", d.d_v);
  } else if (mode == "raw-like") {
    s.mode = SyntheticMode::RawLike;
    s.d_a = j.value("d_a", SyntheticFactorSpec::kSpectrumBins);
    s.d_v = j.value("d_v", SyntheticFactorSpec::kImageSide * SyntheticFactorSpec::kImageSide);
  } else {
    throw ConfigError("synthetic spec: unknown mode '" + mode + "' (expected feature | raw-like)");
  }
}

ObservationModel::ObservationModel(const SyntheticFactorSpec& spec) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x6d61707300000000ULL));
  id_embed_ = gaussian(rng, {spec.n_identities, kEmbedDim}, 1.0);
  cls_embed_ = gaussian(rng, {spec.n_classes, kEmbedDim}, 1.0);

  const int64_t k_a = spec.dim_shared_dyn + spec.dim_audio_dyn;
  const int64_t k_v = spec.dim_shared_dyn + spec.dim_visual_dyn;
  if (spec.mode == SyntheticMode::Feature) {
    static_a_ = gaussian(rng, {spec.d_a, 2 * kEmbedDim}, 0.35);
    static_v_ = gaussian(rng, {spec.d_v, 2 * kEmbedDim}, 0.35);
    dyn_a_ = gaussian(rng, {spec.d_a, k_a}, 1.0);
    dyn_v_ = gaussian(rng, {spec.d_v, k_v}, 1.0);
    bias_a_ = gaussian(rng, {spec.d_a}, 0.1);
    bias_v_ = gaussian(rng, {spec.d_v}, 0.1);
    return;
  }

  // Raw-like: shared dynamics live in the mouth box, visual-only dynamics in
  // the eye box, static factors everywhere. Audio is a log-linear spectrum.
  constexpr int64_t side = SyntheticFactorSpec::kImageSide;
  mouth_mask_ = region_mask(transform::RegionBox::mouth(side, side));
  eyes_mask_ = region_mask(transform::RegionBox::eyes(side, side));
  static_v_ = gaussian(rng, {spec.d_v, 2 * kEmbedDim}, 0.5);
  bias_v_ = gaussian(rng, {spec.d_v}, 0.5);
  dyn_v_ = gaussian(rng, {spec.d_v, k_v}, 1.5);
  dyn_v_.slice(1, 0, spec.dim_shared_dyn).mul_(mouth_mask_.unsqueeze(1));
  dyn_v_.slice(1, spec.dim_shared_dyn, k_v).mul_(eyes_mask_.unsqueeze(1));

  static_a_ = gaussian(rng, {spec.d_a, 2 * kEmbedDim}, 0.5);
  bias_a_ = torch::linspace(2.0, -4.0, spec.d_a, torch::kFloat64) + gaussian(rng, {spec.d_a}, 0.3);
  dyn_a_ = gaussian(rng, {spec.d_a, k_a}, 1.0);
}

torch::Tensor ObservationModel::static_embedding(const GroundTruthFactors& f) const {
  require(f.s_id >= 0 && f.s_id < spec_.n_identities, "synthetic: identity label out of range");
  require(f.s_cls >= 0 && f.s_cls < spec_.n_classes, "synthetic: class label out of range");
  return torch::cat({id_embed_[f.s_id], cls_embed_[f.s_cls]});
}

AVFeatureSequence ObservationModel::render_feature(const GroundTruthFactors& f) const {
  const auto e = static_embedding(f);
  const auto h_a = torch::matmul(torch::cat({f.c, f.a}, 1), dyn_a_.t());
  const auto h_v = torch::matmul(torch::cat({f.c, f.v}, 1), dyn_v_.t());
  auto x_a = torch::mv(static_a_, e) + bias_a_ + h_a + kSinGain * torch::sin(h_a);
  auto x_v = torch::mv(static_v_, e) + bias_v_ + h_v + kSinGain * torch::sin(h_v);
  return {x_a, x_v, "", f};
}

AVFeatureSequence ObservationModel::render_raw_like(const GroundTruthFactors& f) const {
  const auto e = static_embedding(f);
  const auto logit = torch::mv(static_v_, e) + bias_v_ + torch::matmul(torch::cat({f.c, f.v}, 1), dyn_v_.t());
  const auto log_spec = torch::mv(static_a_, e) + bias_a_ + torch::matmul(torch::cat({f.c, f.a}, 1), dyn_a_.t());
  return {log_spec, torch::sigmoid(logit), "", f};
}

AVFeatureSequence ObservationModel::render(const GroundTruthFactors& factors, std::mt19937_64* noise_rng) const {
  const int64_t T = factors.c.size(0);
  require(factors.c.dim() == 2 && factors.c.size(1) == spec_.dim_shared_dyn, "synthetic: c has wrong shape");
  require(factors.a.sizes() == torch::IntArrayRef({T, spec_.dim_audio_dyn}), "synthetic: a has wrong shape");
  require(factors.v.sizes() == torch::IntArrayRef({T, spec_.dim_visual_dyn}), "synthetic: v has wrong shape");

  const bool raw = spec_.mode == SyntheticMode::RawLike;
  auto seq = raw ? render_raw_like(factors) : render_feature(factors);
  if (noise_rng != nullptr && spec_.noise_std > 0.0) {
    seq.x_a = seq.x_a + gaussian(*noise_rng, {T, spec_.d_a}, spec_.noise_std);
    seq.x_v = seq.x_v + gaussian(*noise_rng, {T, spec_.d_v}, spec_.noise_std);
  }
  if (raw) {
    seq.x_a = torch::exp(seq.x_a).clamp_min(kSpectralFloor);
    seq.x_v = seq.x_v.clamp(0.0, 1.0);
  }
  seq.x_a = seq.x_a.to(torch::kFloat32);
  seq.x_v = seq.x_v.to(torch::kFloat32);
  return seq;
}

uint64_t sequence_seed(uint64_t corpus_seed, int64_t index) {
  return splitmix64(splitmix64(corpus_seed) + static_cast<uint64_t>(index) + 1);
}

GroundTruthFactors sample_factors(const SyntheticFactorSpec& spec, std::mt19937_64& rng) {
  GroundTruthFactors f;
  f.s_id = std::uniform_int_distribution<int64_t>(0, spec.n_identities - 1)(rng);
  f.s_cls = std::uniform_int_distribution<int64_t>(0, spec.n_classes - 1)(rng);
  f.c = random_walk(rng, spec.T, spec.dim_shared_dyn);
  f.a = random_walk(rng, spec.T, spec.dim_audio_dyn);
  f.v = random_walk(rng, spec.T, spec.dim_visual_dyn);
  return f;
}

SyntheticCorpus generate_synthetic(const SyntheticFactorSpec& spec) {
  spec.validate();
  const ObservationModel model(spec);
  SyntheticCorpus corpus{spec, {}};
  corpus.sequences.reserve(static_cast<size_t>(spec.n_sequences));
  for (int64_t i = 0; i < spec.n_sequences; ++i) {
    std::mt19937_64 rng(sequence_seed(spec.seed, i));
    auto seq = model.render(sample_factors(spec, rng), &rng);
    char id[32];
    std::snprintf(id, sizeof(id), "seq_%05lld", static_cast<long long>(i));
    seq.id = id;
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace vqmd::features
