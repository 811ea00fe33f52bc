#include "vqmd/transform/latent_ops.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "vqmd/common/error.hpp"

namespace vqmd::transform {

std::string to_string(Latent l) {
  switch (l) {
    case Latent::W: return "w";
    case Latent::ZAV: return "zav";
    case Latent::ZA: return "za";
    case Latent::ZV: return "zv";
  }
  return "w";
}

Latent latent_from_string(const std::string& s) {
  std::string k;
  for (const char ch : s) {
    if (ch != '_' && !std::isspace(static_cast<unsigned char>(ch))) {
      k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (k == "w") return Latent::W;
  if (k == "zav") return Latent::ZAV;
  if (k == "za") return Latent::ZA;
  if (k == "zv") return Latent::ZV;
  throw InvalidInput("unknown latent '" + s + "' (expected w | zav | za | zv)");
}

SwapSpec::SwapSpec(std::initializer_list<Latent> latents) {
  for (const auto l : latents) mask_ |= 1U << static_cast<int>(l);
  require(mask_ != 0, "swap spec: subset must be non-empty");
}

SwapSpec SwapSpec::parse(const std::string& list) {
  SwapSpec spec{Latent::W};
  spec.mask_ = 0;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) spec.mask_ |= 1U << static_cast<int>(latent_from_string(item));
  }
  require(spec.mask_ != 0, "swap spec: subset must be non-empty");
  return spec;
}

std::string SwapSpec::str() const {
  std::string out;
  for (const auto l : {Latent::W, Latent::ZAV, Latent::ZA, Latent::ZV}) {
    if (!contains(l)) continue;
    if (!out.empty()) out += ",";
    out += to_string(l);
  }
  return out;
}

model::LatentBundle analyze(model::MDVAE& model, const torch::Tensor& x_a, const torch::Tensor& x_v) {
  torch::NoGradGuard no_grad;
  const auto& c = model->config();
  const auto& ref = c.has_audio() ? x_a : x_v;
  require(ref.defined() && (ref.dim() == 2 || ref.dim() == 3), "analyze: observations must be [T, d] or [B, T, d]");
  const bool single = ref.dim() == 2;
  const auto batch = [&](const torch::Tensor& x) {
    if (!x.defined()) return x;
    return single ? x.unsqueeze(0) : x;
  };
  auto e = model->embed(c.has_audio() ? batch(x_a) : torch::Tensor(), c.has_visual() ? batch(x_v) : torch::Tensor());
  model::LatentBundle out;
  out.w = model->infer_w(e).mean;
  const auto tr = model->infer_dynamics(e, out.w, nullptr, model::SampleMode::Mean);
  out.z_av = tr.z_av;
  out.z_a = tr.z_a;
  out.z_v = tr.z_v;
  if (single) {
    out.w = out.w.squeeze(0);
    out.z_av = out.z_av.squeeze(0);
    if (out.z_a.defined()) out.z_a = out.z_a.squeeze(0);
    if (out.z_v.defined()) out.z_v = out.z_v.squeeze(0);
  }
  return out;
}

model::LatentBundle swap(const model::LatentBundle& a, const model::LatentBundle& b, const SwapSpec& spec) {
  const auto time_dim = [](const torch::Tensor& z) { return z.size(z.dim() - 2); };
  const bool dynamic = spec.contains(Latent::ZAV) || spec.contains(Latent::ZA) || spec.contains(Latent::ZV);
  if (dynamic) require(time_dim(a.z_av) == time_dim(b.z_av), "swap: dynamical swaps need sequences of equal length");
  model::LatentBundle out = a;
  if (spec.contains(Latent::W)) out.w = b.w;
  if (spec.contains(Latent::ZAV)) out.z_av = b.z_av;
  if (spec.contains(Latent::ZA)) out.z_a = b.z_a;
  if (spec.contains(Latent::ZV)) out.z_v = b.z_v;
  return out;
}

torch::Tensor interpolate_w(const torch::Tensor& w1, const torch::Tensor& w2, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "interpolate_w: alpha must lie in [0, 1]");
  require(w1.sizes() == w2.sizes(), "interpolate_w: shape mismatch");
  return (1.0 - alpha) * w1 + alpha * w2;
}

features::AVFeatureSequence resynthesize_features(model::MDVAE& model, const model::LatentBundle& bundle) {
  torch::NoGradGuard no_grad;
  const auto& c = model->config();
  const bool single = bundle.w.dim() == 1;
  const auto batch = [&](const torch::Tensor& x) {
    if (!x.defined()) return x;
    return single ? x.unsqueeze(0) : x;
  };
  features::AVFeatureSequence out;
  if (c.has_audio()) {
    out.x_a = model->decode_audio(batch(bundle.w), batch(bundle.z_av), batch(bundle.z_a));
    if (single) out.x_a = out.x_a.squeeze(0);
  }
  if (c.has_visual()) {
    out.x_v = model->decode_visual(batch(bundle.w), batch(bundle.z_av), batch(bundle.z_v));
    if (single) out.x_v = out.x_v.squeeze(0);
  }
  return out;
}

RawResynthesis resynthesize_raw(model::MDVAE& model, const model::LatentBundle& bundle, vq::VQVAE* audio,
                                vq::VQVAE* visual) {
  require(bundle.w.dim() == 1, "resynthesize_raw: expects one sequence");
  const auto& c = model->config();
  if (c.has_audio() && audio == nullptr && c.has_visual() && visual == nullptr) {
    throw ConfigError("raw resynthesis needs stage-1 checkpoints");
  }
  const auto feats = resynthesize_features(model, bundle);
  torch::NoGradGuard no_grad;
  RawResynthesis out;
  if (c.has_visual() && visual != nullptr) {
    require((*visual)->config().feature_dim() == c.d_v, "resynthesize_raw: visual VQ grid does not match d_v");
    out.images = (*visual)->decode_features(feats.x_v, &out.visual_indices);
  }
  if (c.has_audio() && audio != nullptr) {
    require((*audio)->config().feature_dim() == c.d_a, "resynthesize_raw: audio VQ grid does not match d_a");
    out.spectra = (*audio)->decode_features(feats.x_a, &out.audio_indices).squeeze(1);
  }
  return out;
}

features::AVFeatureSequence encode_raw(vq::VQVAE& audio, vq::VQVAE& visual, const torch::Tensor& spectra,
                                       const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  features::AVFeatureSequence out;
  out.x_a = audio->encode_features(spectra.to(torch::kFloat32));
  const auto flat = images.dim() == 4 ? images.reshape({images.size(0), -1}) : images;
  out.x_v = visual->encode_features(flat.to(torch::kFloat32));
  return out;
}

}  // namespace vqmd::transform
