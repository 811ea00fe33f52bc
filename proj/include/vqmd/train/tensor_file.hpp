#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <string_view>

namespace vqmd::train {

/// Single-tensor container:
///   "MDT1" | u32 rank | rank x u32 dims | prod(dims) x f32
/// All integers and floats little-endian. Tensors of any floating dtype are
/// stored as 32-bit floats.
inline constexpr std::string_view kTensorMagic = "MDT1";

std::string encode_tensor(const torch::Tensor& tensor);

/// `name` only decorates error messages.
torch::Tensor decode_tensor(std::string_view bytes, const std::string& name);

/// Writes via a temporary file and rename, so readers never see a partial file.
void write_tensor(const std::filesystem::path& path, const torch::Tensor& tensor);
torch::Tensor read_tensor(const std::filesystem::path& path);

/// Writes `bytes` to `path` atomically (temporary sibling + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace vqmd::train
