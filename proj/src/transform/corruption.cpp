#include "vqmd/transform/corruption.hpp"

#include <cmath>

#include "vqmd/common/error.hpp"
#include "vqmd/transform/latent_ops.hpp"

namespace vqmd::transform {

torch::Tensor corrupt(const torch::Tensor& frames, const RegionBox& region, double variance, model::NoiseSource& noise) {
  require(frames.dim() == 4, "corrupt: frames must be [10, C, H, W]");
  require(frames.size(0) == kCorruptionFrames, "corrupt: expected exactly 10 frames, got " + std::to_string(frames.size(0)));
  require(variance >= 0.0, "corrupt: variance must be >= 0");
  require(region.within(frames.size(2), frames.size(3)), "corrupt: region " + region.name + " lies outside the image");
  auto out = frames.clone();
  if (variance == 0.0) return out;
  auto patch = out.slice(0, kFirstCorrupted, kLastCorrupted + 1)
                   .slice(2, region.r0, region.r1)
                   .slice(3, region.c0, region.c1);
  const auto eps = noise.normal(patch.sizes(), patch.options());
  patch.copy_((patch + std::sqrt(variance) * eps).clamp(0.0, 1.0));
  return out;
}

torch::Tensor denoise(const torch::Tensor& frames, const torch::Tensor& spectra, model::MDVAE& model,
                      vq::VQVAE& audio, vq::VQVAE& visual) {
  require(frames.dim() == 4, "denoise: frames must be [T, C, H, W]");
  const auto& c = model->config();
  require(c.has_visual(), "denoise: the model has no visual stream");
  const auto flat = frames.reshape({frames.size(0), -1}).to(torch::kFloat32);
  torch::Tensor x_a;
  torch::Tensor x_v;
  {
    torch::NoGradGuard no_grad;
    x_v = visual->encode_features(flat);
    if (c.has_audio()) {
      require(spectra.defined() && spectra.size(0) == frames.size(0), "denoise: spectra must pair with the frames");
      x_a = audio->encode_features(spectra.to(torch::kFloat32));
    }
  }
  const auto bundle = analyze(model, x_a, x_v);
  auto raw = resynthesize_raw(model, bundle, nullptr, &visual);
  return raw.images.reshape(frames.sizes());
}

}  // namespace vqmd::transform
