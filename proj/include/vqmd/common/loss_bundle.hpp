#pragma once

#include <torch/torch.h>

#include <string>
#include <string_view>
#include <vector>

namespace vqmd {

/// Named scalar loss terms with per-term weights. total == sum(weight_i * term_i).
class LossBundle {
 public:
  struct Entry {
    std::string name;
    torch::Tensor value;
    double weight;
  };

  void add(std::string name, torch::Tensor value, double weight = 1.0);

  const std::vector<Entry>& entries() const { return entries_; }
  const torch::Tensor& total() const { return total_; }
  bool has(std::string_view name) const;
  const torch::Tensor& term(std::string_view name) const;
  double weight(std::string_view name) const;
  double value(std::string_view name) const { return term(name).item<double>(); }

 private:
  std::vector<Entry> entries_;
  torch::Tensor total_;
};

}  // namespace vqmd
