#include "vqmd/train/checkpoint.hpp"

#include <chrono>

#include "vqmd/common/error.hpp"
#include "vqmd/train/tensor_file.hpp"

namespace vqmd::train {

namespace fs = std::filesystem;

namespace {

std::vector<int64_t> shape_of(const torch::Tensor& t) { return t.sizes().vec(); }

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  const fs::path tmp = dir.string() + ".tmp-" + std::to_string(stamp);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp / "tensors");

  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.tensors) {
    const auto file = "tensors/" + name + ".ten";
    write_tensor(tmp / file, tensor);
    entries.push_back({{"name", name}, {"file", file}, {"shape", shape_of(tensor)}, {"dtype", "f32"}});
  }
  const nlohmann::json manifest{{"format_version", kCheckpointFormatVersion},
                                {"model_type", ckpt.model_type},
                                {"config", ckpt.config},
                                {"step", ckpt.step},
                                {"metrics", ckpt.metrics},
                                {"tensors", entries}};
  write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");

  if (fs::exists(dir)) fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw LoadError(LoadError::Kind::Io, "checkpoint " + dir.string() + ": manifest.json not found");
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::BadManifest, "checkpoint " + dir.string() + ": malformed manifest: " + e.what());
  }

  Checkpoint ckpt;
  try {
    const auto version = m.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw LoadError(LoadError::Kind::BadManifest,
                      "checkpoint " + dir.string() + ": unsupported format_version " + std::to_string(version));
    }
    ckpt.model_type = m.at("model_type").get<std::string>();
    ckpt.config = m.at("config");
    ckpt.step = m.at("step").get<int64_t>();
    ckpt.metrics = m.value("metrics", nlohmann::json::object());
    for (const auto& entry : m.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto path = dir / entry.at("file").get<std::string>();
      if (!fs::exists(path)) throw LoadError(LoadError::Kind::MissingTensor, "missing tensor: " + name);
      auto t = decode_tensor(read_file(path), name);
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      if (t.sizes().vec() != shape) {
        throw LoadError(LoadError::Kind::ShapeMismatch, "tensor " + name + ": file shape does not match the manifest");
      }
      ckpt.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::BadManifest, "checkpoint " + dir.string() + ": malformed manifest: " + e.what());
  }
  return ckpt;
}

std::map<std::string, torch::Tensor> module_tensors(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters(true)) out.emplace(p.key(), p.value().detach().to(torch::kCPU).clone());
  for (const auto& b : module.named_buffers(true)) out.emplace(b.key(), b.value().detach().to(torch::kCPU).clone());
  return out;
}

void load_module_tensors(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& tensors) {
  torch::NoGradGuard no_grad;
  const auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw LoadError(LoadError::Kind::MissingTensor, "missing tensor: " + name);
    if (it->second.sizes() != target.sizes()) {
      throw LoadError(LoadError::Kind::ShapeMismatch, "tensor " + name + ": checkpoint shape does not match the model");
    }
    target.copy_(it->second);
  };
  for (auto& p : module.named_parameters(true)) copy_into(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy_into(b.key(), b.value());
}

}  // namespace vqmd::train
