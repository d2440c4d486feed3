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

// Command-line entry point. Links only the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scir/scir.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string mode;
  int iterations = 0;
  bool no_consistency = false;
  bool no_dcpo_gate = false;
  bool single_judge_prompt = false;
  bool no_length_reg = false;
  bool no_adaptive_ref = false;
  std::string checkpoint;
  std::string baseline;
  int instances = 100;
  std::size_t entries = 64;
  unsigned long long seed = 11;
  bool quiet = false;
};

int exit_code(scir_status s) {
  switch (s) {
    case SCIR_OK:
      return kExitOk;
    case SCIR_ERR_CONFIG:
    case SCIR_ERR_INVALID_ARGUMENT:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

int report_error(scir_status s) {
  std::fprintf(stderr, "error (%s): %s\n", scir_status_name(s), scir_last_error());
  return exit_code(s);
}

void log_to_stderr(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

void print_and_free(char* s) {
  if (s == nullptr) return;
  std::printf("%s\n", s);
  scir_string_free(s);
}

class ConfigHandle {
 public:
  ~ConfigHandle() { scir_config_free(cfg_); }
  scir_config** out() { return &cfg_; }
  scir_config* get() const { return cfg_; }

 private:
  scir_config* cfg_ = nullptr;
};

scir_status build_config(const Options& o, const std::string& command,
                         ConfigHandle& cfg) {
  scir_status s = o.config_path.empty() ? scir_config_default(cfg.out())
                                        : scir_config_load(o.config_path.c_str(), cfg.out());
  if (s != SCIR_OK) return s;
  for (const auto& assignment : o.overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error (config): override '%s' is not of the form key=value\n",
                   assignment.c_str());
      return SCIR_ERR_CONFIG;
    }
    s = scir_config_set(cfg.get(), assignment.substr(0, eq).c_str(),
                        assignment.substr(eq + 1).c_str());
    if (s != SCIR_OK) return s;
  }
  const auto flag = [&](const char* key, const std::string& value) {
    return scir_config_set_flag(cfg.get(), key, value.c_str());
  };
  if (!o.mode.empty() && (s = flag("mode", "\"" + o.mode + "\"")) != SCIR_OK) return s;
  if (o.iterations > 0 &&
      (s = flag("train.iterations", std::to_string(o.iterations))) != SCIR_OK) {
    return s;
  }
  const std::pair<bool, const char*> ablations[] = {
      {o.no_consistency, "train.no_consistency"},
      {o.no_dcpo_gate, "train.no_dcpo_gate"},
      {o.single_judge_prompt, "train.single_judge_prompt"},
      {o.no_length_reg, "train.no_length_reg"},
      {o.no_adaptive_ref, "train.no_adaptive_ref"},
  };
  for (const auto& [on, key] : ablations) {
    if (on && (s = flag(key, "true")) != SCIR_OK) return s;
  }
  if ((s = scir_config_apply_env(cfg.get())) != SCIR_OK) return s;
  if (!o.quiet) {
    char* resolved = nullptr;
    if ((s = scir_config_to_json(cfg.get(), &resolved)) != SCIR_OK) return s;
    std::fprintf(stderr, "[%s] resolved config:\n%s\n", command.c_str(), resolved);
    scir_string_free(resolved);
  }
  return SCIR_OK;
}

int run(const std::string& command, const Options& o) {
  if (!o.quiet) scir_set_log(log_to_stderr, nullptr);
  char* summary = nullptr;
  scir_status s = SCIR_OK;
  if (command == "gradcheck") {
    s = scir_gradcheck(o.instances, o.entries, o.seed, &summary);
    print_and_free(summary);
    return s == SCIR_OK ? kExitOk : report_error(s);
  }
  ConfigHandle cfg;
  if ((s = build_config(o, command, cfg)) != SCIR_OK) {
    return *scir_last_error() != '\0' ? report_error(s) : exit_code(s);
  }
  if (command == "gen-data") {
    s = scir_gen_data(cfg.get(), &summary);
  } else if (command == "sft") {
    s = scir_sft(cfg.get(), &summary);
  } else if (command == "iterate") {
    s = scir_iterate(cfg.get(), &summary);
  } else if (command == "eval") {
    s = scir_eval(cfg.get(), o.checkpoint.c_str(), o.baseline.c_str(), &summary);
  } else {
    s = scir_report(cfg.get(), &summary);
  }
  print_and_free(summary);
  return s == SCIR_OK ? kExitOk : report_error(s);
}

void add_config_options(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--set", o.overrides, "Dotted override key=value (repeatable)")
      ->allow_extra_args(false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCIR lab: self-consistent internal rewards at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(scir_version()));
  Options o;
  app.add_flag("-q,--quiet", o.quiet, "Suppress progress output on stderr");

  auto* gen = app.add_subcommand("gen-data", "Generate prompts, SFT corpus and gold pairs");
  add_config_options(gen, o);

  auto* sft = app.add_subcommand("sft", "Train M_0 from the base checkpoint");
  add_config_options(sft, o);

  auto* iterate = app.add_subcommand("iterate", "Run the self-rewarding iterations");
  add_config_options(iterate, o);
  iterate->add_option("--mode", o.mode, "Labeling mode")
      ->check(CLI::IsMember({"scir", "srlm_judge_pointwise", "srlm_irm", "external_gold"}));
  iterate->add_option("--iterations", o.iterations, "Number of iterations")
      ->check(CLI::PositiveNumber);
  iterate->add_flag("--no-consistency-loss", o.no_consistency, "Drop the consistency term");
  iterate->add_flag("--no-dcpo-gate", o.no_dcpo_gate, "Train DPO on every pair");
  iterate->add_flag("--single-judge-prompt", o.single_judge_prompt,
                    "Use one judge template in one order");
  iterate->add_flag("--no-length-reg", o.no_length_reg, "Disable length regularization");
  iterate->add_flag("--no-adaptive-ref", o.no_adaptive_ref, "Always use the local reference");

  auto* eval = app.add_subcommand("eval", "Run the evaluation suites on a checkpoint");
  add_config_options(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint tag (default: latest M_t)");
  eval->add_option("--baseline", o.baseline, "Win-rate baseline tag (default: M_0)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all losses");
  grad->add_option("--instances", o.instances, "Random instances")->check(CLI::PositiveNumber);
  grad->add_option("--entries", o.entries, "Parameters checked per instance (0: all)");
  grad->add_option("--seed", o.seed, "Instance seed");

  auto* report = app.add_subcommand("report", "Aggregate metrics into CSV and series data");
  add_config_options(report, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
