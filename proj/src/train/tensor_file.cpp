#include "vqmd/train/tensor_file.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "vqmd/common/error.hpp"

namespace vqmd::train {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

uint32_t get_u32(std::string_view bytes, size_t offset) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_tensor(const torch::Tensor& tensor) {
  const auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  std::string out(kTensorMagic);
  put_u32(out, static_cast<uint32_t>(t.dim()));
  for (const auto d : t.sizes()) put_u32(out, static_cast<uint32_t>(d));
  out.reserve(out.size() + static_cast<size_t>(t.numel()) * 4);
  const float* p = t.data_ptr<float>();
  for (int64_t i = 0; i < t.numel(); ++i) put_u32(out, std::bit_cast<uint32_t>(p[i]));
  return out;
}

torch::Tensor decode_tensor(std::string_view bytes, const std::string& name) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kTensorMagic) {
    throw LoadError(LoadError::Kind::UnrecognizedContainer, "unrecognized container: " + name);
  }
  if (bytes.size() < 8) throw LoadError(LoadError::Kind::TruncatedTensor, "truncated tensor header: " + name);
  const uint32_t rank = get_u32(bytes, 4);
  if (bytes.size() < 8 + 4 * static_cast<size_t>(rank)) {
    throw LoadError(LoadError::Kind::TruncatedTensor, "truncated tensor header: " + name);
  }
  std::vector<int64_t> shape(rank);
  size_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes, 8 + 4 * i);
    numel *= static_cast<size_t>(shape[i]);
  }
  const size_t offset = 8 + 4 * static_cast<size_t>(rank);
  if (bytes.size() != offset + 4 * numel) {
    throw LoadError(LoadError::Kind::TruncatedTensor,
                    "truncated tensor: " + name + " (expected " + std::to_string(offset + 4 * numel) +
                        " bytes, found " + std::to_string(bytes.size()) + ")");
  }
  auto out = torch::empty(shape, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (size_t i = 0; i < numel; ++i) p[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw LoadError(LoadError::Kind::Io, "cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw LoadError(LoadError::Kind::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_tensor(const std::filesystem::path& path, const torch::Tensor& tensor) {
  write_file_atomic(path, encode_tensor(tensor));
}

torch::Tensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path), path.filename().string());
}

}  // namespace vqmd::train
