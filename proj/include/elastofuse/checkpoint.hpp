#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "elastofuse/nn/layers.hpp"

namespace elastofuse {

/// Versioned tensor archive: magic, version, JSON metadata, named float
/// tensors, trailing CRC-32 over everything after the magic. Loading
/// verifies the checksum, the version, and that names and shapes match the
/// receiving state exactly.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const nn::StateMap& state);

/// Loads tensors into the given state and returns the archive metadata.
/// Throws CheckpointError on checksum, version, name, or shape mismatch.
nlohmann::json load_checkpoint(const std::string& path, const nn::StateMap& state);

/// Reads only the metadata block (still checksum-verified).
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace elastofuse
