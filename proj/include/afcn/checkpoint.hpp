// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afcn/model.hpp"

namespace afcn {

/// On-disk layout, little-endian:
///   "AFCN" | u32 version | u64 config hash | u32 len + architecture JSON |
///   u32 count | count × (u32 len + name | u32 rank | u64 dims[rank] | f64 data[])
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t config_hash = 0;
  nlohmann::json architecture;
  std::vector<std::pair<std::string, Tensor>> arrays;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds parameters for the stored architecture. Throws ConfigError when
/// the stored hash does not match the architecture record or an array is
/// missing or misshapen.
std::pair<ModelConfig, ModelParams> restore_model(const Checkpoint& checkpoint);

}  // namespace afcn
