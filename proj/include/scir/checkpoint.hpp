// Copyright 2026 The SCIR Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SCIR_CHECKPOINT_HPP_
#define SCIR_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/lm.hpp"

namespace scir {

// On disk a checkpoint is <tag>.bin (little-endian f32 parameters) next to
// <tag>.json {config, iteration_tag, param_count, sha256, ...metadata}.
struct Checkpoint {
  Model model;
  std::string iteration_tag;
  nlohmann::json manifest;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
// Strict: unknown keys are rejected, missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_params_f32le(const grad::ParamVector& params);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Returns the manifest that was written. `metadata` keys are merged in.
nlohmann::json save_checkpoint(const std::filesystem::path& dir,
                               const std::string& tag, const Model& model,
                               const nlohmann::json& metadata = nlohmann::json::object());

// Verifies param_count and the blob hash.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           const std::string& tag);

}  // namespace scir

#endif  // SCIR_CHECKPOINT_HPP_
