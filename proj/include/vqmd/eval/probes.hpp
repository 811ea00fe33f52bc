#pragma once

#include <torch/torch.h>

#include <json.hpp>
#include <string>
#include <vector>

namespace vqmd::eval {

enum class ProbeKind { MLR, MLP };
enum class SplitKind { PersonDependent, PersonIndependent };

std::string to_string(ProbeKind k);
std::string to_string(SplitKind s);
ProbeKind probe_kind_from_string(const std::string& s);
SplitKind split_kind_from_string(const std::string& s);

inline constexpr int64_t kMlpHidden = 64;

struct ProbeOptions {
  ProbeKind kind = ProbeKind::MLR;
  int64_t steps = 500;          ///< full-batch Adam steps
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
};

/// Softmax classifier: linear (MLR) or two ReLU hidden layers of width 64
/// followed by a linear layer (MLP). Inputs are standardised with the
/// training-set statistics stored on the probe.
class Probe {
 public:
  Probe(ProbeKind kind, int64_t input_dim, int64_t n_classes);

  /// Cross-entropy training on features [N, d] and labels [N].
  void fit(const torch::Tensor& x, const torch::Tensor& labels, const ProbeOptions& options);
  torch::Tensor logits(const torch::Tensor& x);
  torch::Tensor predict(const torch::Tensor& x);

  /// Trainable parameter count; input_dim * n_classes + n_classes for MLR.
  int64_t n_params() const;
  ProbeKind kind() const { return kind_; }
  int64_t input_dim() const { return input_dim_; }
  int64_t n_classes() const { return n_classes_; }

 private:
  ProbeKind kind_;
  int64_t input_dim_, n_classes_;
  torch::nn::Sequential net_;
  torch::Tensor mean_, scale_;
};

double accuracy(const torch::Tensor& labels, const torch::Tensor& predicted);
/// Unweighted mean of per-class F1 over classes present in either vector.
double macro_f1(const torch::Tensor& labels, const torch::Tensor& predicted, int64_t n_classes);

struct ProbeReport {
  ProbeKind kind = ProbeKind::MLR;
  SplitKind split = SplitKind::PersonDependent;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  int64_t n_params = 0;
  int64_t n_folds = 1;
  bool domain_adapted = false;
};

/// {kind, split, accuracy, f1_macro, n_params}
nlohmann::json to_json(const ProbeReport& r);

/// Trains and scores a probe.
///  - PersonDependent: one random 70/30 split of all rows.
///  - PersonIndependent: rows grouped by `groups` (identities) into
///    min(5, #groups) folds; scores are averaged over folds.
/// With `adapt`, held-out features are first mapped onto the training
/// features by ot_domain_adapt. Throws InvalidInput if a class is missing
/// from a training split.
ProbeReport train_probe(const torch::Tensor& features, const torch::Tensor& labels, const torch::Tensor& groups,
                        int64_t n_classes, SplitKind split, const ProbeOptions& options, bool adapt = false);

}  // namespace vqmd::eval
