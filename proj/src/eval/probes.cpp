#include "vqmd/eval/probes.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "vqmd/common/error.hpp"
#include "vqmd/eval/ot.hpp"

namespace vqmd::eval {

std::string to_string(ProbeKind k) { return k == ProbeKind::MLR ? "mlr" : "mlp"; }
std::string to_string(SplitKind s) { return s == SplitKind::PersonDependent ? "person-dependent" : "person-independent"; }

ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "mlr" || s == "MLR") return ProbeKind::MLR;
  if (s == "mlp" || s == "MLP") return ProbeKind::MLP;
  throw InvalidInput("unknown probe kind '" + s + "' (expected mlr | mlp)");
}

SplitKind split_kind_from_string(const std::string& s) {
  if (s == "person-dependent") return SplitKind::PersonDependent;
  if (s == "person-independent") return SplitKind::PersonIndependent;
  throw InvalidInput("unknown split '" + s + "' (expected person-dependent | person-independent)");
}

Probe::Probe(ProbeKind kind, int64_t input_dim, int64_t n_classes)
    : kind_(kind), input_dim_(input_dim), n_classes_(n_classes) {
  require(input_dim >= 1 && n_classes >= 2, "probe: need input_dim >= 1 and at least two classes");
  if (kind == ProbeKind::MLR) {
    net_->push_back(torch::nn::Linear(input_dim, n_classes));
  } else {
    net_->push_back(torch::nn::Linear(input_dim, kMlpHidden));
    net_->push_back(torch::nn::ReLU());
    net_->push_back(torch::nn::Linear(kMlpHidden, kMlpHidden));
    net_->push_back(torch::nn::ReLU());
    net_->push_back(torch::nn::Linear(kMlpHidden, n_classes));
  }
  net_->to(torch::kFloat64);
  mean_ = torch::zeros({input_dim}, torch::kFloat64);
  scale_ = torch::ones({input_dim}, torch::kFloat64);
}

void Probe::fit(const torch::Tensor& x, const torch::Tensor& labels, const ProbeOptions& options) {
  require(x.dim() == 2 && x.size(1) == input_dim_, "probe: features must be [N, input_dim]");
  require(labels.dim() == 1 && labels.size(0) == x.size(0), "probe: one label per row");
  const auto X = x.to(torch::kFloat64);
  mean_ = X.mean(0);
  scale_ = X.std(0, false).clamp_min(1e-8);
  const auto Xs = (X - mean_) / scale_;
  const auto y = labels.to(torch::kInt64);

  torch::manual_seed(options.seed);
  for (auto& p : net_->parameters()) {
    torch::NoGradGuard no_grad;
    if (p.dim() == 2) {
      torch::nn::init::kaiming_uniform_(p, std::sqrt(5.0));
    } else {
      p.zero_();
    }
  }
  torch::optim::Adam opt(net_->parameters(),
                         torch::optim::AdamOptions(options.learning_rate).weight_decay(options.weight_decay));
  net_->train();
  for (int64_t s = 0; s < options.steps; ++s) {
    opt.zero_grad();
    auto loss = torch::nn::functional::cross_entropy(net_->forward(Xs), y);
    loss.backward();
    opt.step();
  }
  net_->eval();
}

torch::Tensor Probe::logits(const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  return net_->forward((x.to(torch::kFloat64) - mean_) / scale_);
}

torch::Tensor Probe::predict(const torch::Tensor& x) { return logits(x).argmax(1); }

int64_t Probe::n_params() const {
  int64_t n = 0;
  for (const auto& p : net_->parameters()) n += p.numel();
  return n;
}

double accuracy(const torch::Tensor& labels, const torch::Tensor& predicted) {
  require(labels.numel() == predicted.numel() && labels.numel() > 0, "accuracy: size mismatch");
  return labels.to(torch::kInt64).eq(predicted.to(torch::kInt64)).to(torch::kFloat64).mean().item<double>();
}

double macro_f1(const torch::Tensor& labels, const torch::Tensor& predicted, int64_t n_classes) {
  require(labels.numel() == predicted.numel() && labels.numel() > 0, "macro_f1: size mismatch");
  const auto y = labels.to(torch::kInt64), p = predicted.to(torch::kInt64);
  double total = 0.0;
  int64_t present = 0;
  for (int64_t k = 0; k < n_classes; ++k) {
    const auto tp = (y.eq(k) & p.eq(k)).sum().item<int64_t>();
    const auto n_true = y.eq(k).sum().item<int64_t>();
    const auto n_pred = p.eq(k).sum().item<int64_t>();
    if (n_true == 0 && n_pred == 0) continue;
    ++present;
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(n_true + n_pred);
  }
  return present == 0 ? 0.0 : total / static_cast<double>(present);
}

nlohmann::json to_json(const ProbeReport& r) {
  return nlohmann::json{{"kind", to_string(r.kind)},
                        {"split", to_string(r.split)},
                        {"accuracy", r.accuracy},
                        {"f1_macro", r.f1_macro},
                        {"n_params", r.n_params},
                        {"n_folds", r.n_folds},
                        {"domain_adapted", r.domain_adapted}};
}

namespace {

torch::Tensor rows(const torch::Tensor& x, const std::vector<int64_t>& idx) {
  return x.index_select(0, torch::tensor(idx, torch::kInt64));
}

void check_classes_present(const torch::Tensor& labels, int64_t n_classes) {
  const auto counts = torch::bincount(labels.to(torch::kInt64), {}, n_classes);
  for (int64_t k = 0; k < n_classes; ++k) {
    if (counts[k].item<int64_t>() == 0) {
      throw InvalidInput("stratification error: class " + std::to_string(k) + " is absent from the training split");
    }
  }
}

}  // namespace

ProbeReport train_probe(const torch::Tensor& features, const torch::Tensor& labels, const torch::Tensor& groups,
                        int64_t n_classes, SplitKind split, const ProbeOptions& options, bool adapt) {
  require(features.dim() == 2 && labels.dim() == 1 && labels.size(0) == features.size(0),
          "train_probe: features [N, d] and labels [N] required");
  const auto N = features.size(0);
  require(N >= n_classes, "train_probe: fewer samples than classes");
  require(labels.min().item<int64_t>() >= 0 && labels.max().item<int64_t>() < n_classes,
          "train_probe: label out of range");

  std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> folds;  // (train, test)
  std::mt19937_64 rng(options.seed);
  if (split == SplitKind::PersonDependent) {
    std::vector<int64_t> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), int64_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<int64_t>(std::llround(0.7 * static_cast<double>(N)));
    require(n_train >= 1 && n_train < N, "train_probe: too few samples for a 70/30 split");
    folds.emplace_back(std::vector<int64_t>(order.begin(), order.begin() + n_train),
                       std::vector<int64_t>(order.begin() + n_train, order.end()));
  } else {
    require(groups.defined() && groups.numel() == N, "train_probe: person-independent split needs one group per row");
    std::map<int64_t, std::vector<int64_t>> by_group;
    const auto g = groups.to(torch::kInt64);
    for (int64_t i = 0; i < N; ++i) by_group[g[i].item<int64_t>()].push_back(i);
    require(by_group.size() >= 2, "train_probe: person-independent split needs at least two identities");
    std::vector<int64_t> ids;
    for (const auto& [id, _] : by_group) ids.push_back(id);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_folds = std::min<int64_t>(5, static_cast<int64_t>(ids.size()));
    for (int64_t f = 0; f < n_folds; ++f) {
      std::vector<int64_t> train, test;
      for (size_t j = 0; j < ids.size(); ++j) {
        auto& dst = static_cast<int64_t>(j) % n_folds == f ? test : train;
        const auto& members = by_group[ids[j]];
        dst.insert(dst.end(), members.begin(), members.end());
      }
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
      folds.emplace_back(std::move(train), std::move(test));
    }
  }

  ProbeReport report;
  report.kind = options.kind;
  report.split = split;
  report.n_folds = static_cast<int64_t>(folds.size());
  report.domain_adapted = adapt;
  for (const auto& [train_idx, test_idx] : folds) {
    const auto x_train = rows(features, train_idx), y_train = rows(labels, train_idx);
    auto x_test = rows(features, test_idx);
    const auto y_test = rows(labels, test_idx);
    check_classes_present(y_train, n_classes);
    Probe probe(options.kind, features.size(1), n_classes);
    probe.fit(x_train, y_train, options);
    if (adapt) x_test = ot_domain_adapt(x_train, x_test).mapped;
    const auto pred = probe.predict(x_test);
    report.accuracy += accuracy(y_test, pred);
    report.f1_macro += macro_f1(y_test, pred, n_classes);
    report.n_params = probe.n_params();
  }
  report.accuracy /= static_cast<double>(folds.size());
  report.f1_macro /= static_cast<double>(folds.size());
  return report;
}

}  // namespace vqmd::eval
