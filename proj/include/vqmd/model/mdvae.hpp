#pragma once

#include <torch/torch.h>

#include "vqmd/model/config.hpp"
#include "vqmd/model/gaussian.hpp"

namespace vqmd::model {

/// One static vector plus the three dynamical latent sequences.
/// Batched: w [B, l_w], z_* [B, T, l_*]. Absent modalities leave z_a / z_v undefined.
struct LatentBundle {
  torch::Tensor w;
  torch::Tensor z_av;
  torch::Tensor z_a;
  torch::Tensor z_v;
};

/// Everything computed while inferring the dynamical latents.
struct InferenceTrace {
  torch::Tensor r_a, r_v;        ///< [B, T, d_a], [B, T, dim(r_v)]
  torch::Tensor h_av, h_a, h_v;  ///< recurrent states, [B, T, width]
  DiagGaussian q_av, p_av;       ///< posterior / learned prior per step
  DiagGaussian q_a, p_a;
  DiagGaussian q_v, p_v;
  torch::Tensor z_av, z_a, z_v;  ///< the values fed forward (samples or means)
};

enum class SampleMode { Sample, Mean };

/// Dense layers, each followed by the activation.
class DenseStackImpl : public torch::nn::Module {
 public:
  DenseStackImpl(int64_t in, const std::vector<int64_t>& widths, bool tanh);
  torch::Tensor forward(torch::Tensor x);
  int64_t out_dim() const { return out_dim_; }

 private:
  torch::nn::ModuleList layers_{nullptr};
  bool tanh_;
  int64_t out_dim_;
};
TORCH_MODULE(DenseStack);

/// Mean and log-variance heads.
class GaussianHeadImpl : public torch::nn::Module {
 public:
  GaussianHeadImpl(int64_t in, int64_t out);
  DiagGaussian forward(const torch::Tensor& x);

 private:
  torch::nn::Linear mean_{nullptr}, log_var_{nullptr};
};
TORCH_MODULE(GaussianHead);

/// Learned autoregressive prior: GRU over the previous latent, dense layer, heads.
/// Its recurrent state is shared with the matching posterior.
class PriorBlockImpl : public torch::nn::Module {
 public:
  PriorBlockImpl(int64_t latent, int64_t gru, int64_t dense);
  /// Advances the recurrence on z_{t-1} and returns (h_t, p(z_t | z_{1:t-1})).
  std::pair<torch::Tensor, DiagGaussian> step(const torch::Tensor& z_prev, const torch::Tensor& h_prev);
  int64_t state_dim() const { return state_dim_; }

 private:
  torch::nn::GRUCell cell_{nullptr};
  torch::nn::Linear dense_{nullptr};
  GaussianHead head_{nullptr};
  int64_t state_dim_;
};
TORCH_MODULE(PriorBlock);

/// Posterior network over [observation_t ; state_t ; w]. The first dense
/// layer is stored as three column blocks so that the observation and w
/// contributions can be computed once per sequence; the sum equals one
/// Linear applied to the concatenation.
class PosteriorBlockImpl : public torch::nn::Module {
 public:
  PosteriorBlockImpl(int64_t obs_in, int64_t state_in, int64_t static_in, const std::vector<int64_t>& widths,
                     int64_t latent, bool tanh);
  /// [B, T, obs_in] x [B, static_in] -> first-layer pre-activation without the state term, [B, T, h0].
  torch::Tensor precompute(const torch::Tensor& obs, const torch::Tensor& w);
  DiagGaussian step(const torch::Tensor& pre_t, const torch::Tensor& state);

 private:
  torch::Tensor act(const torch::Tensor& x) const { return tanh_ ? torch::tanh(x) : torch::relu(x); }

  torch::nn::Linear obs_proj_{nullptr}, state_proj_{nullptr}, static_proj_{nullptr};
  DenseStack rest_{nullptr};
  GaussianHead head_{nullptr};
  bool tanh_;
};
TORCH_MODULE(PosteriorBlock);

/// Observation decoder: dense stack on [z_specific ; z_av ; w], linear output.
class ObservationDecoderImpl : public torch::nn::Module {
 public:
  ObservationDecoderImpl(int64_t in, const std::vector<int64_t>& hidden, int64_t out, bool tanh);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  DenseStack hidden_{nullptr};
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(ObservationDecoder);

struct Embedded {
  torch::Tensor r_a;  ///< identity of x_a
  torch::Tensor r_v;  ///< dense embedding of x_v
};

struct GeneratedSequence {
  torch::Tensor mean_a;  ///< [B, T, d_a] (undefined without audio)
  torch::Tensor mean_v;  ///< [B, T, d_v] (undefined without video)
  LatentBundle latents;
};

/// The multimodal dynamical VAE: static latent w, shared dynamics z_av and
/// modality-specific dynamics z_a, z_v, with unit-variance Gaussian
/// observation models.
///
/// Inference order per sequence: w from a bidirectional recurrence over the
/// embedded observations; then, for t = 1..T, z_av_t, z_a_t and z_v_t from
/// their posterior blocks. Posteriors only see frame t of the observations
/// (no future frames), the previous latents through the shared recurrence,
/// w, and (for z_a, z_v) the current z_av_t.
class MDVAEImpl : public torch::nn::Module {
 public:
  explicit MDVAEImpl(ModelConfig config);

  /// x_a [B, T, d_a], x_v [B, T, d_v]; the absent modality may be undefined.
  Embedded embed(const torch::Tensor& x_a, const torch::Tensor& x_v);
  /// q(w | x_a, x_v), [B, l_w].
  DiagGaussian infer_w(const Embedded& e);
  /// Causal inference of z_av, z_a, z_v given w [B, l_w]. `noise` is only used with SampleMode::Sample.
  InferenceTrace infer_dynamics(const Embedded& e, const torch::Tensor& w, NoiseSource* noise, SampleMode mode);

  /// Mean of p(x_a_t | w, z_av_t, z_a_t); z [B, T, l], w [B, l_w].
  torch::Tensor decode_audio(const torch::Tensor& w, const torch::Tensor& z_av, const torch::Tensor& z_a);
  /// Mean of p(x_v_t | w, z_av_t, z_v_t).
  torch::Tensor decode_visual(const torch::Tensor& w, const torch::Tensor& z_av, const torch::Tensor& z_v);

  /// Ancestral sampling of the dynamical latents from the learned priors, then decoding. w [B, l_w].
  GeneratedSequence generate(const torch::Tensor& w, int64_t T, NoiseSource& noise);

  const ModelConfig& config() const { return config_; }

 private:
  void check_observations(const torch::Tensor& x_a, const torch::Tensor& x_v) const;

  ModelConfig config_;
  DenseStack visual_embed_{nullptr};
  torch::nn::GRU w_gru_{nullptr};
  torch::nn::Linear w_dense_{nullptr};
  GaussianHead w_head_{nullptr};
  PriorBlock prior_av_{nullptr}, prior_a_{nullptr}, prior_v_{nullptr};
  PosteriorBlock posterior_av_{nullptr}, posterior_a_{nullptr}, posterior_v_{nullptr};
  ObservationDecoder visual_decoder_{nullptr}, audio_decoder_{nullptr};
};
TORCH_MODULE(MDVAE);

/// Throws NumericError naming `block` if `t` has non-finite entries.
void check_finite(const torch::Tensor& t, const char* block);

}  // namespace vqmd::model
