#include "vqmd/common/loss_bundle.hpp"

#include <algorithm>

#include "vqmd/common/error.hpp"

namespace vqmd {

void LossBundle::add(std::string name, torch::Tensor value, double weight) {
  auto contribution = value * weight;
  total_ = total_.defined() ? total_ + contribution : contribution;
  entries_.push_back({std::move(name), std::move(value), weight});
}

bool LossBundle::has(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const torch::Tensor& LossBundle::term(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw InvalidInput("loss bundle has no term '" + std::string(name) + "'");
}

double LossBundle::weight(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.weight;
  }
  throw InvalidInput("loss bundle has no term '" + std::string(name) + "'");
}

}  // namespace vqmd
