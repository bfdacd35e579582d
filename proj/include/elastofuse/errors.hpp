#pragma once

#include <stdexcept>
#include <string>

namespace elastofuse {

// Error categories map 1:1 onto CLI exit codes (see cli.hpp).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: manifests, images, split plans, prediction files.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated model/tensor contracts: shape mismatches, missing heads, bad policies.
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or incompatible checkpoint archives.
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace elastofuse
