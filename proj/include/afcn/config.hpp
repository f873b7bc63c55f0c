// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "afcn/trainer.hpp"

namespace afcn {

/// Sectioned JSON view of a TrainConfig:
/// { "model": {...}, "connectivity": {...}, "losses": {...}, "train": {...} }.
nlohmann::json to_json(const TrainConfig& config);

/// Reads a (possibly partial) config on top of the defaults. Unknown keys
/// are rejected with ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Applies `path=value`, where path is dotted ("losses.lambda1") or a bare
/// key that is unique across sections ("lambda1"). The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Everything that determines parameter shapes and the forward pass.
nlohmann::json architecture_json(const ModelConfig& model);
ModelConfig model_config_from_architecture(const nlohmann::json& arch);

/// FNV-1a over the compact dump of `j`.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace afcn
