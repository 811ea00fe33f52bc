#include "vqmd/vq/vq_vae.hpp"

#include <numeric>

#include "vqmd/common/error.hpp"

namespace vqmd::vq {

namespace nn = torch::nn;

namespace {

/// Forwards `x` through a convolution of any of the four kinds used here.
torch::Tensor apply_conv(const std::shared_ptr<nn::Module>& m, const torch::Tensor& x) {
  if (auto* c = m->as<nn::Conv2d>()) return c->forward(x);
  if (auto* c = m->as<nn::Conv1d>()) return c->forward(x);
  if (auto* c = m->as<nn::ConvTranspose2d>()) return c->forward(x);
  if (auto* c = m->as<nn::ConvTranspose1d>()) return c->forward(x);
  throw ConfigError("vq: unexpected layer type " + m->name());
}

std::shared_ptr<nn::Module> make_conv(bool spatial, bool transposed, int64_t in, int64_t out, int64_t k, int64_t s,
                                      int64_t p, int64_t output_padding = 0) {
  if (spatial && !transposed) return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(s).padding(p)).ptr();
  if (!spatial && !transposed) return nn::Conv1d(nn::Conv1dOptions(in, out, k).stride(s).padding(p)).ptr();
  if (spatial) {
    return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, k).stride(s).padding(p).output_padding(output_padding))
        .ptr();
  }
  return nn::ConvTranspose1d(nn::ConvTranspose1dOptions(in, out, k).stride(s).padding(p).output_padding(output_padding))
      .ptr();
}

/// Two 3x3 (or width-3) convolutions with a skip connection.
class ResidualBlockImpl : public nn::Module {
 public:
  ResidualBlockImpl(bool spatial, bool transposed, int64_t channels, bool tanh)
      : conv1_(register_module("conv1", make_conv(spatial, transposed, channels, channels, 3, 1, 1))),
        conv2_(register_module("conv2", make_conv(spatial, transposed, channels, channels, 3, 1, 1))),
        tanh_(tanh) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto h = apply_conv(conv2_, act(apply_conv(conv1_, x)));
    return act(x + h);
  }

 private:
  torch::Tensor act(const torch::Tensor& x) const { return tanh_ ? torch::tanh(x) : torch::relu(x); }

  std::shared_ptr<nn::Module> conv1_, conv2_;
  bool tanh_;
};
TORCH_MODULE(ResidualBlock);

int64_t conv_out(int64_t n, int64_t k, int64_t s, int64_t p) { return (n + 2 * p - k) / s + 1; }

constexpr int64_t kAudioKernels[3] = {4, 4, 3};
constexpr double kLogSpectrumClamp = 40.0;

}  // namespace

std::string to_string(Modality m) { return m == Modality::Audio ? "audio" : "visual"; }

Modality modality_from_string(const std::string& s) {
  if (s == "audio") return Modality::Audio;
  if (s == "visual") return Modality::Visual;
  throw ConfigError("unknown modality '" + s + "' (expected audio | visual)");
}

VQConfig VQConfig::visual() { return {}; }

VQConfig VQConfig::audio() {
  VQConfig c;
  c.modality = Modality::Audio;
  c.K = 128;
  c.D = 8;
  c.in_channels = 1;
  c.input_size = 513;
  c.channels = {16, 32, 32};
  c.decoder_channels = {32, 16};
  c.residual_stacks = 1;
  return c;
}

VQConfig VQConfig::visual_small() {
  VQConfig c;
  c.K = 64;
  c.D = 8;
  c.in_channels = 1;
  c.input_size = 16;
  c.channels = {16, 32};
  c.decoder_channels = {16};
  c.residual_stacks = 1;
  return c;
}

VQConfig VQConfig::audio_small() {
  VQConfig c = audio();
  c.K = 64;
  c.D = 4;
  c.input_size = 65;
  c.channels = {8, 16, 16};
  c.decoder_channels = {16, 8};
  return c;
}

std::vector<int64_t> VQConfig::grid() const {
  if (modality == Modality::Visual) {
    const int64_t side = input_size >> channels.size();
    return {side, side};
  }
  int64_t n = input_size;
  for (const auto k : kAudioKernels) n = conv_out(n, k, 2, 1);
  return {n};
}

int64_t VQConfig::feature_dim() const {
  const auto g = grid();
  return D * std::accumulate(g.begin(), g.end(), int64_t{1}, std::multiplies<>());
}

int64_t VQConfig::frame_dim() const {
  return modality == Modality::Visual ? in_channels * input_size * input_size : input_size;
}

void VQConfig::validate() const {
  if (K < 1 || D < 1) throw ConfigError("vq config: K and D must be >= 1");
  if (channels.empty()) throw ConfigError("vq config: need at least one encoder layer");
  if (modality == Modality::Visual) {
    if (decoder_channels.size() + 1 != channels.size()) {
      throw ConfigError("vq config: visual decoder needs one width per inner upsampling layer");
    }
    if (input_size % (int64_t{1} << channels.size()) != 0) {
      throw ConfigError("vq config: image side must be divisible by 2^layers");
    }
  } else {
    if (channels.size() != 3 || decoder_channels.size() != 2 || in_channels != 1) {
      throw ConfigError("vq config: audio stack has exactly three strided layers on one channel");
    }
    if (8 * grid()[0] + 2 < input_size) throw ConfigError("vq config: audio decoder cannot reach input length");
  }
  if (commitment_beta < 0.0) throw ConfigError("vq config: commitment_beta must be >= 0");
}

void to_json(nlohmann::json& j, const VQConfig& c) {
  j = nlohmann::json{{"modality", to_string(c.modality)},
                     {"K", c.K},
                     {"D", c.D},
                     {"grid", c.grid()},
                     {"commitment_beta", c.commitment_beta},
                     {"decay", c.decay},
                     {"laplace_eps", c.laplace_eps},
                     {"in_channels", c.in_channels},
                     {"input_size", c.input_size},
                     {"channels", c.channels},
                     {"decoder_channels", c.decoder_channels},
                     {"residual_stacks", c.residual_stacks}};
}

void from_json(const nlohmann::json& j, VQConfig& c) {
  const auto modality = modality_from_string(j.value("modality", std::string("visual")));
  VQConfig d = modality == Modality::Audio ? VQConfig::audio() : VQConfig::visual();
  c.modality = modality;
  c.K = j.value("K", d.K);
  c.D = j.value("D", d.D);
  c.commitment_beta = j.value("commitment_beta", d.commitment_beta);
  c.decay = j.value("decay", d.decay);
  c.laplace_eps = j.value("laplace_eps", d.laplace_eps);
  c.in_channels = j.value("in_channels", d.in_channels);
  c.input_size = j.value("input_size", d.input_size);
  c.channels = j.value("channels", d.channels);
  c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
  c.residual_stacks = j.value("residual_stacks", d.residual_stacks);
  if (j.contains("grid") && j.at("grid").get<std::vector<int64_t>>() != c.grid()) {
    throw ConfigError("vq config: declared grid does not match the layer stack");
  }
}

VQVAEImpl::VQVAEImpl(VQConfig config) : config_(std::move(config)) {
  config_.validate();
  const bool spatial = config_.modality == Modality::Visual;
  const bool tanh = !spatial;
  const auto& ch = config_.channels;
  const int64_t width = ch.back();

  encoder_ = register_module("encoder", nn::ModuleList());
  int64_t in = config_.in_channels;
  for (size_t i = 0; i < ch.size(); ++i) {
    const int64_t k = spatial ? 4 : kAudioKernels[i];
    encoder_->push_back(make_conv(spatial, false, in, ch[i], k, 2, 1));
    in = ch[i];
  }
  encoder_res_ = register_module("encoder_res", nn::ModuleList());
  for (int64_t i = 0; i < config_.residual_stacks; ++i) encoder_res_->push_back(ResidualBlock(spatial, false, width, tanh));
  encoder_proj_ = register_module("encoder_proj", make_conv(spatial, false, width, config_.D, 1, 1, 0));

  decoder_proj_ = register_module("decoder_proj", make_conv(spatial, true, config_.D, width, 1, 1, 0));
  decoder_res_ = register_module("decoder_res", nn::ModuleList());
  for (int64_t i = 0; i < config_.residual_stacks; ++i) decoder_res_->push_back(ResidualBlock(spatial, true, width, tanh));

  decoder_up_ = register_module("decoder_up", nn::ModuleList());
  std::vector<int64_t> widths{width};
  widths.insert(widths.end(), config_.decoder_channels.begin(), config_.decoder_channels.end());
  widths.push_back(config_.in_channels);
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    if (spatial) {
      decoder_up_->push_back(make_conv(true, true, widths[i], widths[i + 1], 4, 2, 1));
    } else {
      // Mirrors kAudioKernels: (3,2,1)+output padding doubles exactly, (4,2,1) doubles, (4,2,0) gives 2n+2.
      static constexpr int64_t kernels[3] = {3, 4, 4}, pads[3] = {1, 1, 0}, extra[3] = {1, 0, 0};
      decoder_up_->push_back(make_conv(false, true, widths[i], widths[i + 1], kernels[i], 2, pads[i], extra[i]));
    }
  }

  codebook_ = register_module("codebook", Codebook(config_.K, config_.D, config_.decay, config_.laplace_eps));
}

torch::Tensor VQVAEImpl::activation(const torch::Tensor& x) const {
  return config_.modality == Modality::Audio ? torch::tanh(x) : torch::relu(x);
}

torch::Tensor VQVAEImpl::as_input(const torch::Tensor& frames) const {
  const int64_t n = config_.input_size;
  if (config_.modality == Modality::Visual) {
    const auto shape = std::vector<int64_t>{config_.in_channels, n, n};
    if (frames.dim() == 4 && frames.sizes().slice(1).vec() == shape) return frames;
    require(frames.dim() == 2 && frames.size(1) == config_.frame_dim(),
            "vq visual: expected [B, " + std::to_string(config_.frame_dim()) + "] or [B, C, H, W] frames");
    return frames.reshape({frames.size(0), config_.in_channels, n, n});
  }
  if (frames.dim() == 3 && frames.size(1) == 1 && frames.size(2) == n) return frames;
  require(frames.dim() == 2 && frames.size(1) == n, "vq audio: expected [B, " + std::to_string(n) + "] spectra");
  return frames.unsqueeze(1);
}

torch::Tensor VQVAEImpl::encode(const torch::Tensor& frames) {
  auto x = as_input(frames);
  if (config_.modality == Modality::Audio) {
    // Power spectra span many decades; the encoder sees their logarithm.
    x = torch::log(x.clamp_min(1e-10));
  }
  for (const auto& layer : *encoder_) x = activation(apply_conv(layer, x));
  for (const auto& block : *encoder_res_) x = block->as<ResidualBlock>()->forward(x);
  return apply_conv(encoder_proj_, x);
}

torch::Tensor VQVAEImpl::decode(const torch::Tensor& grid) {
  auto expected = config_.grid();
  expected.insert(expected.begin(), config_.D);
  require(grid.dim() == static_cast<int64_t>(expected.size()) + 1 && grid.sizes().slice(1).vec() == expected,
          "vq decode: quantized grid has the wrong shape");
  auto x = apply_conv(decoder_proj_, grid);
  for (const auto& block : *decoder_res_) x = block->as<ResidualBlock>()->forward(x);
  const auto n_up = decoder_up_->size();
  for (size_t i = 0; i < n_up; ++i) {
    x = apply_conv(decoder_up_->ptr(i), x);
    if (i + 1 < n_up) x = activation(x);
  }
  if (config_.modality == Modality::Audio) {
    x = x.narrow(2, 0, config_.input_size);
    x = torch::exp(x.clamp(-kLogSpectrumClamp, kLogSpectrumClamp));
  }
  return x;
}

VQForward VQVAEImpl::forward(const torch::Tensor& frames) {
  auto out = quantize(encode(frames));
  auto recon = decode(out.quantized);
  return {std::move(out), std::move(recon)};
}

torch::Tensor VQVAEImpl::encode_features(const torch::Tensor& frames) {
  const auto grid = encode(frames);
  return grid.reshape({grid.size(0), -1});
}

torch::Tensor VQVAEImpl::decode_features(const torch::Tensor& features, torch::Tensor* indices) {
  require(features.dim() == 2 && features.size(1) == config_.feature_dim(),
          "vq decode_features: expected [B, " + std::to_string(config_.feature_dim()) + "]");
  auto shape = config_.grid();
  shape.insert(shape.begin(), config_.D);
  shape.insert(shape.begin(), features.size(0));
  const auto q = quantize(features.reshape(shape));
  if (indices != nullptr) *indices = q.indices;
  return decode(q.quantized);
}

std::vector<torch::Tensor> VQVAEImpl::network_parameters() { return parameters(); }

}  // namespace vqmd::vq
