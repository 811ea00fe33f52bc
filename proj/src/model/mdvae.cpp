#include "vqmd/model/mdvae.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::model {

void check_finite(const torch::Tensor& t, const char* block) {
  if (!t.defined()) return;
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError(block, "non-finite activations");
}

DenseStackImpl::DenseStackImpl(int64_t in, const std::vector<int64_t>& widths, bool tanh) : tanh_(tanh), out_dim_(in) {
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (const auto w : widths) {
    layers_->push_back(torch::nn::Linear(out_dim_, w));
    out_dim_ = w;
  }
}

torch::Tensor DenseStackImpl::forward(torch::Tensor x) {
  for (const auto& layer : *layers_) {
    x = layer->as<torch::nn::Linear>()->forward(x);
    x = tanh_ ? torch::tanh(x) : torch::relu(x);
  }
  return x;
}

GaussianHeadImpl::GaussianHeadImpl(int64_t in, int64_t out) {
  mean_ = register_module("mean", torch::nn::Linear(in, out));
  log_var_ = register_module("log_var", torch::nn::Linear(in, out));
}

DiagGaussian GaussianHeadImpl::forward(const torch::Tensor& x) { return {mean_->forward(x), log_var_->forward(x)}; }

PriorBlockImpl::PriorBlockImpl(int64_t latent, int64_t gru, int64_t dense) : state_dim_(gru) {
  cell_ = register_module("gru", torch::nn::GRUCell(latent, gru));
  dense_ = register_module("dense", torch::nn::Linear(gru, dense));
  head_ = register_module("head", GaussianHead(dense, latent));
}

std::pair<torch::Tensor, DiagGaussian> PriorBlockImpl::step(const torch::Tensor& z_prev, const torch::Tensor& h_prev) {
  auto h = cell_->forward(z_prev, h_prev);
  auto p = head_->forward(torch::relu(dense_->forward(h)));
  return {h, p};
}

PosteriorBlockImpl::PosteriorBlockImpl(int64_t obs_in, int64_t state_in, int64_t static_in,
                                       const std::vector<int64_t>& widths, int64_t latent, bool tanh)
    : tanh_(tanh) {
  const auto h0 = widths.front();
  obs_proj_ = register_module("obs_proj", torch::nn::Linear(obs_in, h0));
  state_proj_ = register_module("state_proj", torch::nn::Linear(torch::nn::LinearOptions(state_in, h0).bias(false)));
  static_proj_ = register_module("static_proj", torch::nn::Linear(torch::nn::LinearOptions(static_in, h0).bias(false)));
  rest_ = register_module("rest", DenseStack(h0, std::vector<int64_t>(widths.begin() + 1, widths.end()), tanh));
  head_ = register_module("head", GaussianHead(rest_->out_dim(), latent));
}

torch::Tensor PosteriorBlockImpl::precompute(const torch::Tensor& obs, const torch::Tensor& w) {
  return obs_proj_->forward(obs) + static_proj_->forward(w).unsqueeze(1);
}

DiagGaussian PosteriorBlockImpl::step(const torch::Tensor& pre_t, const torch::Tensor& state) {
  auto x = act(pre_t + state_proj_->forward(state));
  return head_->forward(rest_->forward(x));
}

ObservationDecoderImpl::ObservationDecoderImpl(int64_t in, const std::vector<int64_t>& hidden, int64_t out, bool tanh) {
  hidden_ = register_module("hidden", DenseStack(in, hidden, tanh));
  out_ = register_module("out", torch::nn::Linear(hidden_->out_dim(), out));
}

torch::Tensor ObservationDecoderImpl::forward(const torch::Tensor& x) { return out_->forward(hidden_->forward(x)); }

MDVAEImpl::MDVAEImpl(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const int64_t r_a = c.has_audio() ? c.d_a : 0;
  const int64_t r_v = c.has_visual() ? c.r_v_dim() : 0;

  if (c.has_visual()) visual_embed_ = register_module("visual_embed", DenseStack(c.d_v, c.visual_embed, false));
  w_gru_ = register_module("w_gru",
                           torch::nn::GRU(torch::nn::GRUOptions(r_a + r_v, c.w_gru).batch_first(true).bidirectional(true)));
  w_dense_ = register_module("w_dense", torch::nn::Linear(2 * c.w_gru, c.w_dense));
  w_head_ = register_module("w_head", GaussianHead(c.w_dense, c.l_w));

  prior_av_ = register_module("prior_av", PriorBlock(c.l_av, c.prior_av_gru, c.prior_av_dense));
  posterior_av_ =
      register_module("posterior_av", PosteriorBlock(r_a + r_v, c.prior_av_gru, c.l_w, c.posterior_av, c.l_av, false));
  if (c.has_audio()) {
    prior_a_ = register_module("prior_a", PriorBlock(c.l_a, c.prior_a_gru, c.prior_a_dense));
    posterior_a_ = register_module(
        "posterior_a", PosteriorBlock(c.d_a, c.prior_a_gru + c.l_av, c.l_w, c.posterior_a, c.l_a, true));
    audio_decoder_ =
        register_module("audio_decoder", ObservationDecoder(c.l_a + c.l_av + c.l_w, c.audio_decoder, c.d_a, true));
  }
  if (c.has_visual()) {
    prior_v_ = register_module("prior_v", PriorBlock(c.l_v, c.prior_v_gru, c.prior_v_dense));
    posterior_v_ = register_module(
        "posterior_v", PosteriorBlock(r_v, c.prior_v_gru + c.l_av, c.l_w, c.posterior_v, c.l_v, false));
    visual_decoder_ =
        register_module("visual_decoder", ObservationDecoder(c.l_v + c.l_av + c.l_w, c.visual_decoder, c.d_v, false));
  }
}

void MDVAEImpl::check_observations(const torch::Tensor& x_a, const torch::Tensor& x_v) const {
  const auto check = [](const torch::Tensor& x, int64_t d, const char* name) {
    require(x.defined() && x.dim() == 3, std::string(name) + " must be [B, T, d]");
    require(x.size(2) == d, std::string(name) + ": expected feature dimension " + std::to_string(d) + ", got " +
                                std::to_string(x.size(2)));
    require(x.size(1) >= 1, std::string(name) + ": sequence length must be >= 1");
  };
  if (config_.has_audio()) check(x_a, config_.d_a, "x_a");
  if (config_.has_visual()) check(x_v, config_.d_v, "x_v");
  if (config_.has_audio() && config_.has_visual()) {
    require(x_a.size(0) == x_v.size(0) && x_a.size(1) == x_v.size(1), "x_a and x_v must share batch size and T");
  }
}

Embedded MDVAEImpl::embed(const torch::Tensor& x_a, const torch::Tensor& x_v) {
  check_observations(x_a, x_v);
  Embedded e;
  if (config_.has_audio()) e.r_a = x_a;
  if (config_.has_visual()) {
    e.r_v = visual_embed_->forward(x_v);
    check_finite(e.r_v, "visual_embed");
  }
  return e;
}

namespace {

torch::Tensor joint_observation(const Embedded& e) {
  if (e.r_a.defined() && e.r_v.defined()) return torch::cat({e.r_v, e.r_a}, -1);
  return e.r_a.defined() ? e.r_a : e.r_v;
}

torch::Tensor draw(const DiagGaussian& g, NoiseSource* noise, SampleMode mode) {
  if (mode == SampleMode::Mean) return g.mean;
  require(noise != nullptr, "sampling requires a noise source");
  return reparameterize(g, noise->normal(g.mean.sizes(), g.mean.options()));
}

}  // namespace

DiagGaussian MDVAEImpl::infer_w(const Embedded& e) {
  auto obs = e.r_a.defined() && e.r_v.defined() ? torch::cat({e.r_a, e.r_v}, -1) : joint_observation(e);
  require(obs.size(1) >= 1, "infer_w: sequence length must be >= 1");
  auto out = w_gru_->forward(obs);
  const auto& h_n = std::get<1>(out);  // [2, B, H]: forward final state, backward final state
  auto summary = torch::cat({h_n[0], h_n[1]}, -1);
  auto g = w_head_->forward(torch::tanh(w_dense_->forward(summary)));
  check_finite(g.mean, "w_encoder");
  check_finite(g.log_var, "w_encoder");
  return g;
}

InferenceTrace MDVAEImpl::infer_dynamics(const Embedded& e, const torch::Tensor& w, NoiseSource* noise,
                                         SampleMode mode) {
  const auto& c = config_;
  require(w.dim() == 2 && w.size(1) == c.l_w, "infer_dynamics: w must be [B, " + std::to_string(c.l_w) + "]");
  auto obs_av = joint_observation(e);
  const auto B = obs_av.size(0);
  const auto T = obs_av.size(1);
  require(w.size(0) == B, "infer_dynamics: batch size of w does not match the observations");
  const auto opts = obs_av.options();

  InferenceTrace tr;
  tr.r_a = e.r_a;
  tr.r_v = e.r_v;

  auto pre_av = posterior_av_->precompute(obs_av, w);
  torch::Tensor pre_a, pre_v;
  if (c.has_audio()) pre_a = posterior_a_->precompute(e.r_a, w);
  if (c.has_visual()) pre_v = posterior_v_->precompute(e.r_v, w);

  auto z_av = torch::zeros({B, c.l_av}, opts), h_av = torch::zeros({B, c.prior_av_gru}, opts);
  torch::Tensor z_a, h_a, z_v, h_v;
  if (c.has_audio()) {
    z_a = torch::zeros({B, c.l_a}, opts);
    h_a = torch::zeros({B, c.prior_a_gru}, opts);
  }
  if (c.has_visual()) {
    z_v = torch::zeros({B, c.l_v}, opts);
    h_v = torch::zeros({B, c.prior_v_gru}, opts);
  }

  std::vector<DiagGaussian> q_av, p_av, q_a, p_a, q_v, p_v;
  std::vector<torch::Tensor> hs_av, hs_a, hs_v, zs_av, zs_a, zs_v;
  for (int64_t t = 0; t < T; ++t) {
    auto [h_av_t, p_av_t] = prior_av_->step(z_av, h_av);
    auto q_av_t = posterior_av_->step(pre_av.select(1, t), h_av_t);
    h_av = h_av_t;
    z_av = draw(q_av_t, noise, mode);
    hs_av.push_back(h_av);
    zs_av.push_back(z_av);
    p_av.push_back(p_av_t);
    q_av.push_back(q_av_t);

    if (c.has_audio()) {
      auto [h_a_t, p_a_t] = prior_a_->step(z_a, h_a);
      auto q_a_t = posterior_a_->step(pre_a.select(1, t), torch::cat({h_a_t, z_av}, -1));
      h_a = h_a_t;
      z_a = draw(q_a_t, noise, mode);
      hs_a.push_back(h_a);
      zs_a.push_back(z_a);
      p_a.push_back(p_a_t);
      q_a.push_back(q_a_t);
    }
    if (c.has_visual()) {
      auto [h_v_t, p_v_t] = prior_v_->step(z_v, h_v);
      auto q_v_t = posterior_v_->step(pre_v.select(1, t), torch::cat({h_v_t, z_av}, -1));
      h_v = h_v_t;
      z_v = draw(q_v_t, noise, mode);
      hs_v.push_back(h_v);
      zs_v.push_back(z_v);
      p_v.push_back(p_v_t);
      q_v.push_back(q_v_t);
    }
  }

  tr.h_av = torch::stack(hs_av, 1);
  tr.p_av = stack(p_av, 1);
  tr.q_av = stack(q_av, 1);
  tr.z_av = torch::stack(zs_av, 1);
  check_finite(tr.p_av.mean, "prior_av");
  check_finite(tr.q_av.mean, "posterior_av");
  check_finite(tr.q_av.log_var, "posterior_av");
  if (c.has_audio()) {
    tr.h_a = torch::stack(hs_a, 1);
    tr.p_a = stack(p_a, 1);
    tr.q_a = stack(q_a, 1);
    tr.z_a = torch::stack(zs_a, 1);
    check_finite(tr.p_a.mean, "prior_a");
    check_finite(tr.q_a.mean, "posterior_a");
    check_finite(tr.q_a.log_var, "posterior_a");
  }
  if (c.has_visual()) {
    tr.h_v = torch::stack(hs_v, 1);
    tr.p_v = stack(p_v, 1);
    tr.q_v = stack(q_v, 1);
    tr.z_v = torch::stack(zs_v, 1);
    check_finite(tr.p_v.mean, "prior_v");
    check_finite(tr.q_v.mean, "posterior_v");
    check_finite(tr.q_v.log_var, "posterior_v");
  }
  return tr;
}

namespace {

torch::Tensor decoder_input(const torch::Tensor& w, const torch::Tensor& z_av, const torch::Tensor& z_s, int64_t l_w,
                            int64_t l_av, int64_t l_s) {
  require(z_av.dim() == 3 && z_s.dim() == 3 && w.dim() == 2, "decoder: expected w [B, l_w] and z [B, T, l]");
  require(w.size(1) == l_w && z_av.size(2) == l_av && z_s.size(2) == l_s, "decoder: latent dimensions do not match");
  require(z_av.sizes().slice(0, 2) == z_s.sizes().slice(0, 2) && w.size(0) == z_av.size(0),
          "decoder: batch/time dimensions do not match");
  auto w_t = w.unsqueeze(1).expand({w.size(0), z_av.size(1), l_w});
  return torch::cat({z_s, z_av, w_t}, -1);
}

}  // namespace

torch::Tensor MDVAEImpl::decode_audio(const torch::Tensor& w, const torch::Tensor& z_av, const torch::Tensor& z_a) {
  require(config_.has_audio(), "decode_audio: model has no audio stream");
  auto out = audio_decoder_->forward(decoder_input(w, z_av, z_a, config_.l_w, config_.l_av, config_.l_a));
  check_finite(out, "audio_decoder");
  return out;
}

torch::Tensor MDVAEImpl::decode_visual(const torch::Tensor& w, const torch::Tensor& z_av, const torch::Tensor& z_v) {
  require(config_.has_visual(), "decode_visual: model has no visual stream");
  auto out = visual_decoder_->forward(decoder_input(w, z_av, z_v, config_.l_w, config_.l_av, config_.l_v));
  check_finite(out, "visual_decoder");
  return out;
}

GeneratedSequence MDVAEImpl::generate(const torch::Tensor& w, int64_t T, NoiseSource& noise) {
  const auto& c = config_;
  require(T >= 1, "generate: T must be >= 1");
  require(w.dim() == 2 && w.size(1) == c.l_w, "generate: w must be [B, " + std::to_string(c.l_w) + "]");
  const auto B = w.size(0);
  const auto opts = w.options();

  const auto rollout = [&](PriorBlock& prior, int64_t latent, int64_t width) {
    auto z = torch::zeros({B, latent}, opts), h = torch::zeros({B, width}, opts);
    std::vector<torch::Tensor> zs;
    for (int64_t t = 0; t < T; ++t) {
      auto [h_t, p_t] = prior->step(z, h);
      h = h_t;
      z = draw(p_t, &noise, SampleMode::Sample);
      zs.push_back(z);
    }
    return torch::stack(zs, 1);
  };

  GeneratedSequence g;
  g.latents.w = w;
  g.latents.z_av = rollout(prior_av_, c.l_av, c.prior_av_gru);
  if (c.has_audio()) {
    g.latents.z_a = rollout(prior_a_, c.l_a, c.prior_a_gru);
    g.mean_a = decode_audio(w, g.latents.z_av, g.latents.z_a);
  }
  if (c.has_visual()) {
    g.latents.z_v = rollout(prior_v_, c.l_v, c.prior_v_gru);
    g.mean_v = decode_visual(w, g.latents.z_av, g.latents.z_v);
  }
  return g;
}

}  // namespace vqmd::model
