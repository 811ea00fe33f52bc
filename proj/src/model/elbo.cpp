#include "vqmd/model/elbo.hpp"

#include "vqmd/common/error.hpp"

namespace vqmd::model {

namespace {

torch::Tensor batch_mean_of_sum(const torch::Tensor& per_item) {
  // per_item [B, ...] -> sum over trailing dims, mean over B
  return per_item.reshape({per_item.size(0), -1}).sum(1).mean();
}

}  // namespace

LossBundle elbo_terms(const torch::Tensor& x_a, const torch::Tensor& x_v, const torch::Tensor& mean_a,
                      const torch::Tensor& mean_v, const DiagGaussian& q_w, const InferenceTrace& trace,
                      double kl_weight) {
  const auto zero = torch::zeros({}, q_w.mean.options());
  LossBundle out;
  if (mean_a.defined()) {
    out.add("recon_a", 0.5 * batch_mean_of_sum((x_a - mean_a).pow(2)));
  } else {
    out.add("recon_a", zero, 0.0);
  }
  if (mean_v.defined()) {
    out.add("recon_v", 0.5 * batch_mean_of_sum((x_v - mean_v).pow(2)));
  } else {
    out.add("recon_v", zero, 0.0);
  }
  out.add("kl_w", kl_diag_gaussian(q_w, DiagGaussian::standard(q_w.mean)).mean(), kl_weight);
  out.add("kl_av", batch_mean_of_sum(kl_diag_gaussian(trace.q_av, trace.p_av)), kl_weight);
  if (trace.q_a.mean.defined()) {
    out.add("kl_a", batch_mean_of_sum(kl_diag_gaussian(trace.q_a, trace.p_a)), kl_weight);
  } else {
    out.add("kl_a", zero, 0.0);
  }
  if (trace.q_v.mean.defined()) {
    out.add("kl_v", batch_mean_of_sum(kl_diag_gaussian(trace.q_v, trace.p_v)), kl_weight);
  } else {
    out.add("kl_v", zero, 0.0);
  }
  return out;
}

ElboResult elbo(MDVAE& model, const torch::Tensor& x_a, const torch::Tensor& x_v, NoiseSource& noise,
                const ElboOptions& options) {
  ElboResult r;
  auto e = model->embed(x_a, x_v);
  r.q_w = model->infer_w(e);
  r.w = options.mode == SampleMode::Sample
            ? reparameterize(r.q_w, noise.normal(r.q_w.mean.sizes(), r.q_w.mean.options()))
            : r.q_w.mean;
  r.trace = model->infer_dynamics(e, r.w, &noise, options.mode);
  const auto& c = model->config();
  if (c.has_audio()) r.mean_a = model->decode_audio(r.w, r.trace.z_av, r.trace.z_a);
  if (c.has_visual()) r.mean_v = model->decode_visual(r.w, r.trace.z_av, r.trace.z_v);
  r.losses = elbo_terms(x_a, x_v, r.mean_a, r.mean_v, r.q_w, r.trace, options.kl_weight);
  if (!torch::isfinite(r.losses.total()).item<bool>()) throw NumericError("elbo", "non-finite loss");
  return r;
}

}  // namespace vqmd::model
