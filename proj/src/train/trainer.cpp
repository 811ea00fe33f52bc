#include "vqmd/train/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "vqmd/common/error.hpp"
#include "vqmd/model/elbo.hpp"
#include "vqmd/vq/losses.hpp"

namespace vqmd::train {

namespace {

constexpr uint64_t kNoiseStream = 0x6A09E667F3BCC909ULL;

LossRecord record_of(int64_t step, const LossBundle& loss) {
  LossRecord r;
  r.step = step;
  r.total = loss.total().item<double>();
  for (const auto& e : loss.entries()) r.terms.emplace_back(e.name, e.value.item<double>());
  return r;
}

bool grads_finite(const std::vector<torch::Tensor>& params) {
  for (const auto& p : params) {
    if (p.grad().defined() && !torch::isfinite(p.grad()).all().item<bool>()) return false;
  }
  return true;
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, double lr) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(lr).betas({0.9, 0.999}).eps(1e-8));
}

/// Cycles through shuffled permutations of [0, n), `batch` indices at a time.
class BatchSampler {
 public:
  BatchSampler(int64_t n, int64_t batch, uint64_t seed) : n_(n), batch_(std::min(batch, n)), rng_(seed) {
    order_.resize(static_cast<size_t>(n));
    reshuffle();
  }

  std::vector<int64_t> next() {
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(batch_));
    while (static_cast<int64_t>(out.size()) < batch_) {
      if (pos_ == n_) reshuffle();
      out.push_back(order_[static_cast<size_t>(pos_++)]);
    }
    return out;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), int64_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  int64_t n_, batch_, pos_ = 0;
  std::vector<int64_t> order_;
  std::mt19937_64 rng_;
};

torch::Tensor index_tensor(const std::vector<int64_t>& idx) {
  return torch::from_blob(const_cast<int64_t*>(idx.data()), {static_cast<int64_t>(idx.size())}, torch::kInt64).clone();
}

torch::Tensor channels_last_rows(const torch::Tensor& grid) {
  std::vector<int64_t> perm{0};
  for (int64_t d = 2; d < grid.dim(); ++d) perm.push_back(d);
  perm.push_back(1);
  return grid.detach().permute(perm).reshape({-1, grid.size(1)});
}

}  // namespace

nlohmann::json to_json(const std::vector<LossRecord>& log) {
  auto out = nlohmann::json::array();
  for (const auto& r : log) {
    nlohmann::json j{{"step", r.step}, {"total", r.total}};
    for (const auto& [name, value] : r.terms) j[name] = value;
    out.push_back(std::move(j));
  }
  return out;
}

void configure_runtime(uint64_t seed, bool deterministic) {
  torch::manual_seed(seed);
  if (deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  }
}

Stage1Result train_stage1(const vq::VQConfig& config, const torch::Tensor& frames, const TrainConfig& train,
                          const TrainHooks& hooks) {
  train.validate();
  require(frames.dim() == 2 && frames.size(1) == config.frame_dim(),
          "train_stage1: frames must be [N, " + std::to_string(config.frame_dim()) + "]");
  require(frames.size(0) >= 1, "train_stage1: no frames");
  configure_runtime(train.seed, train.deterministic);

  Stage1Result result;
  result.model = vq::VQVAE(config);
  auto& model = result.model;
  model->train();
  auto params = model->network_parameters();
  auto opt = make_adam(params, train.effective_learning_rate());
  BatchSampler sampler(frames.size(0), train.effective_batch_size(), train.seed);

  const auto steps = train.effective_max_steps();
  for (int64_t step = 1; step <= steps; ++step) {
    const auto batch = frames.index_select(0, index_tensor(sampler.next()));
    auto fwd = model->forward(batch);
    auto loss = vq::stage1_loss(config.modality, batch, fwd.reconstruction, fwd.vq.continuous, fwd.vq.quantized,
                                config.commitment_beta);
    opt.zero_grad();
    const bool finite_loss = torch::isfinite(loss.total()).item<bool>();
    if (finite_loss) loss.total().backward();
    if (!finite_loss || !grads_finite(params)) {
      if (hooks.divergence_checkpoint) {
        save_checkpoint(vq_checkpoint(model, step - 1, result.log), *hooks.divergence_checkpoint);
      }
      throw NumericError("train_stage1", "non-finite loss at step " + std::to_string(step));
    }
    opt.step();
    model->codebook()->ema_update(fwd.vq.indices, channels_last_rows(fwd.vq.continuous));

    result.log.push_back(record_of(step, loss));
    if (hooks.on_step) hooks.on_step(result.log.back());
  }
  model->eval();
  return result;
}

Stage2Data stack_sequences(const std::vector<features::AVFeatureSequence>& sequences) {
  require(!sequences.empty(), "stack_sequences: no sequences");
  std::vector<torch::Tensor> a, v;
  const auto T = sequences.front().length();
  for (const auto& s : sequences) {
    require(s.length() == T, "stack_sequences: sequence " + s.id + " has a different length");
    a.push_back(s.x_a);
    v.push_back(s.x_v);
  }
  return {torch::stack(a).to(torch::kFloat32), torch::stack(v).to(torch::kFloat32)};
}

torch::Tensor stack_frames(const std::vector<features::AVFeatureSequence>& sequences, vq::Modality modality) {
  std::vector<torch::Tensor> rows;
  for (const auto& s : sequences) rows.push_back(modality == vq::Modality::Audio ? s.x_a : s.x_v);
  return torch::cat(rows, 0).to(torch::kFloat32);
}

std::vector<features::AVFeatureSequence> encode_with_vq(const std::vector<features::AVFeatureSequence>& sequences,
                                                        vq::VQVAE& audio, vq::VQVAE& visual) {
  torch::NoGradGuard no_grad;
  audio->eval();
  visual->eval();
  std::vector<features::AVFeatureSequence> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    auto e = s;
    e.x_a = audio->encode_features(s.x_a.to(torch::kFloat32));
    e.x_v = visual->encode_features(s.x_v.to(torch::kFloat32));
    out.push_back(std::move(e));
  }
  return out;
}

Stage2Result train_stage2(const model::ModelConfig& config, const Stage2Data& data, const TrainConfig& train,
                          const TrainHooks& hooks, const Stage2Data* validation) {
  train.validate();
  const auto& ref = config.has_audio() ? data.x_a : data.x_v;
  require(ref.defined() && ref.dim() == 3, "train_stage2: observations must be [N, T, d]");
  const auto N = ref.size(0);
  const auto T_data = ref.size(1);
  require(T_data >= config.T_train, "train_stage2: sequences are shorter than T_train");
  configure_runtime(train.seed, train.deterministic);

  Stage2Result result;
  result.model = model::MDVAE(config);
  auto& model = result.model;
  model->train();
  auto params = model->parameters();
  auto opt = make_adam(params, train.effective_learning_rate());
  BatchSampler sampler(N, train.effective_batch_size(), train.seed);
  model::NoiseSource noise(train.seed ^ kNoiseStream);

  const auto crop = [&](const torch::Tensor& x, const std::vector<int64_t>& idx, const std::vector<int64_t>& starts) {
    if (!x.defined()) return torch::Tensor();
    std::vector<torch::Tensor> rows;
    rows.reserve(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) rows.push_back(x[idx[i]].narrow(0, starts[i], config.T_train));
    return torch::stack(rows);
  };

  const auto steps = train.effective_max_steps();
  for (int64_t step = 1; step <= steps; ++step) {
    const auto idx = sampler.next();
    std::vector<int64_t> starts(idx.size(), 0);
    if (T_data > config.T_train) {
      std::uniform_int_distribution<int64_t> offset(0, T_data - config.T_train);
      for (auto& s : starts) s = offset(sampler.rng());
    }
    const auto x_a = config.has_audio() ? crop(data.x_a, idx, starts) : torch::Tensor();
    const auto x_v = config.has_visual() ? crop(data.x_v, idx, starts) : torch::Tensor();

    model::ElboOptions options;
    if (train.kl_warmup_steps > 0) {
      options.kl_weight = std::min(1.0, static_cast<double>(step) / static_cast<double>(train.kl_warmup_steps));
    }
    opt.zero_grad();
    model::ElboResult r;
    bool finite = true;
    try {
      r = model::elbo(model, x_a, x_v, noise, options);
      r.losses.total().backward();
      finite = grads_finite(params);
    } catch (const NumericError&) {
      finite = false;
    }
    if (!finite) {
      if (hooks.divergence_checkpoint) {
        save_checkpoint(mdvae_checkpoint(model, step - 1, result.log), *hooks.divergence_checkpoint);
      }
      throw NumericError("train_stage2", "non-finite loss at step " + std::to_string(step));
    }
    opt.step();
    result.log.push_back(record_of(step, r.losses));
    if (hooks.on_step) hooks.on_step(result.log.back());

    if (validation != nullptr && train.eval_every > 0 && step % train.eval_every == 0) {
      torch::NoGradGuard no_grad;
      model->eval();
      model::NoiseSource val_noise(train.seed ^ ~kNoiseStream);
      const auto T = config.T_train;
      const auto vx_a = config.has_audio() ? validation->x_a.narrow(1, 0, T) : torch::Tensor();
      const auto vx_v = config.has_visual() ? validation->x_v.narrow(1, 0, T) : torch::Tensor();
      result.validation.push_back(record_of(step, model::elbo(model, vx_a, vx_v, val_noise).losses));
      model->train();
    }
  }
  model->eval();
  return result;
}

ReconstructionError reconstruction_error(model::MDVAE& model, const Stage2Data& data) {
  torch::NoGradGuard no_grad;
  const auto& c = model->config();
  const auto x_a = c.has_audio() ? data.x_a : torch::Tensor();
  const auto x_v = c.has_visual() ? data.x_v : torch::Tensor();
  auto e = model->embed(x_a, x_v);
  const auto w = model->infer_w(e).mean;
  const auto tr = model->infer_dynamics(e, w, nullptr, model::SampleMode::Mean);
  ReconstructionError out;
  if (c.has_audio()) out.audio = (model->decode_audio(w, tr.z_av, tr.z_a) - x_a).pow(2).mean().item<double>();
  if (c.has_visual()) out.visual = (model->decode_visual(w, tr.z_av, tr.z_v) - x_v).pow(2).mean().item<double>();
  return out;
}

Checkpoint vq_checkpoint(vq::VQVAE& model, int64_t step, const std::vector<LossRecord>& log) {
  Checkpoint c;
  c.model_type = "vq-vae-" + vq::to_string(model->config().modality);
  c.config = model->config();
  c.step = step;
  c.metrics = nlohmann::json{{"loss", to_json(log)}};
  c.tensors = module_tensors(*model);
  return c;
}

vq::VQVAE vq_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_type.rfind("vq-vae-", 0) != 0) {
    throw ConfigError("checkpoint holds a '" + ckpt.model_type + "', not a VQ-VAE");
  }
  vq::VQVAE model(ckpt.config.get<vq::VQConfig>());
  load_module_tensors(*model, ckpt.tensors);
  model->eval();
  return model;
}

Checkpoint mdvae_checkpoint(model::MDVAE& model, int64_t step, const std::vector<LossRecord>& log) {
  Checkpoint c;
  c.model_type = "mdvae";
  c.config = model->config();
  c.step = step;
  c.metrics = nlohmann::json{{"loss", to_json(log)}};
  c.tensors = module_tensors(*model);
  return c;
}

model::MDVAE mdvae_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_type != "mdvae") throw ConfigError("checkpoint holds a '" + ckpt.model_type + "', not an MDVAE");
  model::MDVAE model(ckpt.config.get<model::ModelConfig>());
  load_module_tensors(*model, ckpt.tensors);
  model->eval();
  return model;
}

}  // namespace vqmd::train
