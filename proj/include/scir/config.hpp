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

#ifndef SCIR_CONFIG_HPP_
#define SCIR_CONFIG_HPP_

// Run configuration. Parsing is strict: unknown keys are errors, missing keys
// keep the defaults below. Overrides use dotted keys ("train.iterations=3");
// the value is parsed as JSON and falls back to a plain string.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/losses.hpp"
#include "scir/lm.hpp"
#include "scir/optim.hpp"
#include "scir/selfreward.hpp"
#include "scir/sft.hpp"
#include "scir/tasks.hpp"

namespace scir {

struct PathsConfig {
  std::string run_dir = "runs/default";
  std::string run_id = "run";
};

struct RunConfig {
  ModelConfig model;
  TaskConfig tasks;
  std::size_t sft_prompts = 1200;
  std::size_t heldout_prompts = 200;
  std::size_t gold_pairs = 500;
  SftConfig sft;
  TrainConfig train;
  // Desk-scale log-ratio gaps are a few nats; at beta 0.1 no IRM
  // prediction clears tau.
  LossConfig loss{.beta = 1.0};
  PathsConfig paths;
  LabelingMode mode = LabelingMode::kScir;
  std::vector<std::string> suites{"consistency", "reward-acc", "winrate"};
  int workers = 1;

  void validate() const;
  SplitSizes split_sizes() const;
};

nlohmann::json config_to_json(const RunConfig& c);
// Strict; throws ConfigError naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);

// Sets `key` (dotted) in `j`, creating intermediate objects.
void apply_override(nlohmann::json& j, const std::string& key,
                    const std::string& value);
// "a.b=v" form.
void apply_override(nlohmann::json& j, const std::string& assignment);

nlohmann::json parse_override_value(const std::string& value);
// Value at a dotted key, if present.
std::optional<nlohmann::json> lookup(const nlohmann::json& j,
                                     const std::string& key);

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides);

}  // namespace scir

#endif  // SCIR_CONFIG_HPP_
