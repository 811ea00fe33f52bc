#pragma once

#include <torch/torch.h>

#include "vqmd/common/loss_bundle.hpp"
#include "vqmd/model/mdvae.hpp"

namespace vqmd::model {

/// Multiplies all four KL terms; ramped from 0 to 1 by the trainer's warm-up.
struct ElboOptions {
  double kl_weight = 1.0;
  SampleMode mode = SampleMode::Sample;
};

struct ElboResult {
  LossBundle losses;  ///< recon_a, recon_v, kl_w, kl_av, kl_a, kl_v; total is the negative ELBO without constants
  DiagGaussian q_w;
  torch::Tensor w;    ///< the w fed to the dynamics and decoders
  InferenceTrace trace;
  torch::Tensor mean_a, mean_v;
};

/// Loss terms from already-computed pieces. Every term is summed over time
/// and latent/feature dimensions and averaged over the batch:
///   recon_x = 1/2 sum_t ||x_t - mean_t||^2   (the (d/2) ln 2 pi per frame is dropped)
///   kl_w    = KL(q(w) || N(0, I))
///   kl_z    = sum_t KL(q(z_t | .) || p(z_t | z_{1:t-1}))
/// A modality the model lacks contributes a zero term with weight 0.
LossBundle elbo_terms(const torch::Tensor& x_a, const torch::Tensor& x_v, const torch::Tensor& mean_a,
                      const torch::Tensor& mean_v, const DiagGaussian& q_w, const InferenceTrace& trace,
                      double kl_weight);

/// One reparameterized pass: w, then z_av/z_a/z_v per step, then the decoders.
/// Noise is drawn in that order from `noise`. Throws NumericError on a non-finite total.
ElboResult elbo(MDVAE& model, const torch::Tensor& x_a, const torch::Tensor& x_v, NoiseSource& noise,
                const ElboOptions& options = {});

}  // namespace vqmd::model
