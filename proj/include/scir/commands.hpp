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

#ifndef SCIR_COMMANDS_HPP_
#define SCIR_COMMANDS_HPP_

// Command implementations behind the C API. Each command owns the run
// directory for its duration (lock file) and returns a JSON summary.

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "scir/config.hpp"

namespace scir {

using LogFn = std::function<void(const std::string&)>;

// Exclusive ownership of a run directory through `<dir>/.lock`.
class RunDirLock {
 public:
  explicit RunDirLock(const std::filesystem::path& dir);
  ~RunDirLock();
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  std::filesystem::path path_;
};

nlohmann::json cmd_gen_data(const RunConfig& config, const LogFn& log);
nlohmann::json cmd_sft(const RunConfig& config, const LogFn& log);
nlohmann::json cmd_iterate(const RunConfig& config, const LogFn& log);
// Evaluates checkpoint `tag` (default: the latest) against `baseline`
// (default: M_0) over the configured suites.
nlohmann::json cmd_eval(const RunConfig& config, const std::string& tag,
                        const std::string& baseline, const LogFn& log);

struct GradcheckOptions {
  int instances = 100;
  double h = 1e-3;
  double rel_tol = 1e-5;
  std::size_t entries_per_instance = 64;  // 0 checks every parameter
  std::uint64_t seed = 11;
};

// Finite-difference suite over the DPO, consistency and SCIR batch losses on
// small random models. Throws CheckFailed when any entry fails.
nlohmann::json cmd_gradcheck(const GradcheckOptions& options, const LogFn& log);

// Collects every metrics file of the run into reports/metrics.csv and
// reports/series.json (metric -> dataset -> iteration -> value).
nlohmann::json cmd_report(const RunConfig& config, const LogFn& log);

}  // namespace scir

#endif  // SCIR_COMMANDS_HPP_
