#pragma once

#include <stdexcept>
#include <string>

namespace vqmd {

/// Malformed arguments: wrong shapes, out-of-range values, too-short signals.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or missing configuration (unknown keys, missing checkpoints, empty codebooks).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite activations or losses. `where` names the block that produced them.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Failures reading tensor containers or checkpoints.
class LoadError : public std::runtime_error {
 public:
  enum class Kind { UnrecognizedContainer, TruncatedTensor, MissingTensor, ShapeMismatch, BadManifest, Io };

  LoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Throws InvalidInput with `msg` unless `cond` holds.
void require(bool cond, const std::string& msg);

}  // namespace vqmd
