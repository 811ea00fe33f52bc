#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>

namespace vqmd::train {

inline constexpr int kCheckpointFormatVersion = 1;

/// A model snapshot: manifest plus named tensors.
///
/// On disk:
///   manifest.json   {format_version, model_type, config, step, metrics, tensors: [{name, file, shape, dtype}]}
///   tensors/<name>.ten
struct Checkpoint {
  std::string model_type;
  nlohmann::json config;
  int64_t step = 0;
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
};

/// Writes into a temporary sibling directory and renames it over `dir`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Throws LoadError: BadManifest, MissingTensor (naming it), UnrecognizedContainer,
/// TruncatedTensor, ShapeMismatch (manifest shape vs file).
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Parameters and buffers of `module`, detached and copied to CPU.
std::map<std::string, torch::Tensor> module_tensors(const torch::nn::Module& module);

/// Copies tensors into `module`'s parameters and buffers by name. Every
/// module tensor must be present with the same shape.
void load_module_tensors(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& tensors);

}  // namespace vqmd::train
