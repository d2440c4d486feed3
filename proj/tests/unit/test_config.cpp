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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scir/config.hpp"
#include "scir/error.hpp"

using namespace scir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = fs::temp_directory_path() / ("scir_config_" + name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("defaults round-trip through JSON") {
  const RunConfig c;
  const json j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);
  CHECK(j.at("loss").at("beta") == 1.0);
  CHECK(j.at("loss").at("tau") == 0.7);
  CHECK(j.at("loss").at("alpha") == 1.0);
  CHECK(j.at("train").at("temperature") == 0.7);
  CHECK(j.at("train").at("top_p") == 0.9);
  CHECK(j.at("train").at("k_responses") == 4);
  CHECK(j.at("train").at("epochs_per_iteration") == 2);
  CHECK(j.at("train").at("iterations") == 3);
  CHECK(j.at("train").at("prompts_per_iteration") == 256);
  CHECK(j.at("train").at("alpha_l_grm") == 0.02);
  CHECK(j.at("train").at("alpha_l_irm") == 0.0);
}

TEST_CASE("empty overrides keep file values verbatim") {
  json file = config_to_json(RunConfig{});
  file["train"]["learning_rate"] = 1e-3;
  file["model"]["seed"] = 42;
  const auto path = write_config("verbatim", file);
  const RunConfig c = load_config(path, {});
  CHECK(config_to_json(c) == file);
  fs::remove(path);
}

TEST_CASE("dotted overrides") {
  const RunConfig c = load_config(std::nullopt, {"train.tau=0.9"});
  CHECK(c.loss.tau == 0.9);
  const RunConfig d = load_config(std::nullopt, {"loss.tau=0.8", "paths.run_dir=/tmp/x"});
  CHECK(d.loss.tau == 0.8);
  CHECK(d.paths.run_dir == "/tmp/x");
  CHECK_THROWS_AS(load_config(std::nullopt, {"train.tau=0.9", "loss.tau=0.8"}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"train.tau"}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {".tau=1"}), ConfigError);
}

TEST_CASE("validation and strict parsing") {
  CHECK_THROWS_AS(load_config(std::nullopt, {"train.beta=-1"}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"loss.tau=1.5"}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"train.k_responses=1"}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"mode=\"other\""}), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"suites=[\"plots\"]"}), ConfigError);
  try {
    load_config(std::nullopt, {"train.bogus_key=1"});
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config(fs::path("/nonexistent/scir.json"), {}), ConfigError);
}

TEST_CASE("override value parsing") {
  CHECK(parse_override_value("3") == json(3));
  CHECK(parse_override_value("true") == json(true));
  CHECK(parse_override_value("abc") == json("abc"));
  json j = json::object();
  apply_override(j, "a.b.c", "2");
  CHECK(lookup(j, "a.b.c") == json(2));
  CHECK_FALSE(lookup(j, "a.x"));
}
