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

#include "scir/config.hpp"

#include "scir/checkpoint.hpp"
#include "scir/error.hpp"
#include "scir/json_util.hpp"

namespace scir {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  tasks.validate();
  sft.validate();
  train.validate();
  loss.validate();
  if (sft_prompts < 1) throw ConfigError("tasks.sft_prompts must be >= 1");
  if (heldout_prompts < 1) throw ConfigError("tasks.heldout_prompts must be >= 1");
  if (gold_pairs < 1) throw ConfigError("tasks.gold_pairs must be >= 1");
  if (paths.run_dir.empty()) throw ConfigError("paths.run_dir must not be empty");
  if (paths.run_id.empty()) throw ConfigError("paths.run_id must not be empty");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  for (const auto& s : suites) {
    if (s != "consistency" && s != "reward-acc" && s != "winrate") {
      throw ConfigError("unknown suite '" + s +
                        "' (expected consistency, reward-acc or winrate)");
    }
  }
  // Prompt + response and the widest judge prompt must fit the context.
  const int response = train.max_response_len;
  const int prompt = tasks.max_len + 2;
  const int judge = 5 + prompt + 2 * response;
  if (judge > model.context_len) {
    throw ConfigError("model.context_len " + std::to_string(model.context_len) +
                      " is too small for judge prompts of " +
                      std::to_string(judge) + " tokens");
  }
  if (model.vocab_size < tok::kReservedCount) {
    throw ConfigError("model.vocab_size must be >= " +
                      std::to_string(tok::kReservedCount));
  }
}

SplitSizes RunConfig::split_sizes() const {
  SplitSizes s;
  s.sft = sft_prompts;
  s.per_iteration = train.prompts_per_iteration;
  s.pools = static_cast<std::size_t>(train.iterations) + 1;
  s.heldout = heldout_prompts;
  s.gold_pairs = gold_pairs;
  return s;
}

namespace {

json adamw_json(const AdamWConfig& a) {
  return json{{"adam_beta1", a.beta1},
              {"adam_beta2", a.beta2},
              {"adam_eps", a.eps},
              {"weight_decay", a.weight_decay},
              {"grad_clip", a.grad_clip}};
}

void read_adamw(StrictObject& o, AdamWConfig& a) {
  o.get("adam_beta1", a.beta1);
  o.get("adam_beta2", a.beta2);
  o.get("adam_eps", a.eps);
  o.get("weight_decay", a.weight_decay);
  o.get("grad_clip", a.grad_clip);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json sft{{"task_demos", c.sft.counts.task_demos},
           {"judge_pairs", c.sft.counts.judge_pairs},
           {"point_demos", c.sft.counts.point_demos},
           {"epochs", c.sft.epochs},
           {"learning_rate", c.sft.learning_rate},
           {"batch_size", c.sft.batch_size}};
  sft.update(adamw_json(c.sft.adamw));
  const TrainConfig& t = c.train;
  json train{{"alpha_l_grm", t.alpha_l_grm},
             {"alpha_l_irm", t.alpha_l_irm},
             {"k_responses", t.k_responses},
             {"temperature", t.temperature},
             {"top_p", t.top_p},
             {"max_response_len", t.max_response_len},
             {"epochs_per_iteration", t.epochs_per_iteration},
             {"iterations", t.iterations},
             {"prompts_per_iteration", t.prompts_per_iteration},
             {"learning_rate", t.learning_rate},
             {"batch_size", t.batch_size},
             {"master_seed", t.master_seed},
             {"no_consistency", t.ablations.no_consistency},
             {"no_dcpo_gate", t.ablations.no_dcpo_gate},
             {"single_judge_prompt", t.ablations.single_judge_prompt},
             {"no_length_reg", t.ablations.no_length_reg},
             {"no_adaptive_ref", t.ablations.no_adaptive_ref}};
  train.update(adamw_json(t.adamw));
  return json{
      {"model", model_config_to_json(c.model)},
      {"tasks",
       {{"digits", c.tasks.digits},
        {"min_len", c.tasks.min_len},
        {"max_len", c.tasks.max_len},
        {"sft_prompts", c.sft_prompts},
        {"heldout_prompts", c.heldout_prompts},
        {"gold_pairs", c.gold_pairs}}},
      {"sft", sft},
      {"train", train},
      {"loss",
       {{"beta", c.loss.beta},
        {"tau", c.loss.tau},
        {"alpha", c.loss.alpha},
        {"epsilon_tie", c.loss.epsilon_tie},
        {"literal_confidence", c.loss.literal_confidence}}},
      {"paths", {{"run_dir", c.paths.run_dir}, {"run_id", c.paths.run_id}}},
      {"mode", to_string(c.mode)},
      {"suites", c.suites},
      {"workers", c.workers}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  // The loss knobs are also accepted under "train"; both places must agree.
  std::vector<std::pair<std::string, double>> train_loss_keys;
  StrictObject root(j, "config");
  if (root.has("model")) c.model = model_config_from_json(root.sub("model"));
  if (root.has("tasks")) {
    StrictObject o(root.sub("tasks"), "tasks");
    o.get("digits", c.tasks.digits);
    o.get("min_len", c.tasks.min_len);
    o.get("max_len", c.tasks.max_len);
    o.get("sft_prompts", c.sft_prompts);
    o.get("heldout_prompts", c.heldout_prompts);
    o.get("gold_pairs", c.gold_pairs);
    o.finish();
  }
  if (root.has("sft")) {
    StrictObject o(root.sub("sft"), "sft");
    o.get("task_demos", c.sft.counts.task_demos);
    o.get("judge_pairs", c.sft.counts.judge_pairs);
    o.get("point_demos", c.sft.counts.point_demos);
    o.get("epochs", c.sft.epochs);
    o.get("learning_rate", c.sft.learning_rate);
    o.get("batch_size", c.sft.batch_size);
    read_adamw(o, c.sft.adamw);
    o.finish();
  }
  if (root.has("train")) {
    StrictObject o(root.sub("train"), "train");
    TrainConfig& t = c.train;
    o.get("alpha_l_grm", t.alpha_l_grm);
    o.get("alpha_l_irm", t.alpha_l_irm);
    o.get("k_responses", t.k_responses);
    o.get("temperature", t.temperature);
    o.get("top_p", t.top_p);
    o.get("max_response_len", t.max_response_len);
    o.get("epochs_per_iteration", t.epochs_per_iteration);
    o.get("iterations", t.iterations);
    o.get("prompts_per_iteration", t.prompts_per_iteration);
    o.get("learning_rate", t.learning_rate);
    o.get("batch_size", t.batch_size);
    o.get("master_seed", t.master_seed);
    o.get("no_consistency", t.ablations.no_consistency);
    o.get("no_dcpo_gate", t.ablations.no_dcpo_gate);
    o.get("single_judge_prompt", t.ablations.single_judge_prompt);
    o.get("no_length_reg", t.ablations.no_length_reg);
    o.get("no_adaptive_ref", t.ablations.no_adaptive_ref);
    for (const char* key : {"beta", "tau", "alpha", "epsilon_tie"}) {
      if (!o.has(key)) continue;
      double v = 0.0;
      o.get(key, v);
      train_loss_keys.emplace_back(key, v);
    }
    read_adamw(o, t.adamw);
    o.finish();
  }
  if (root.has("loss")) {
    StrictObject o(root.sub("loss"), "loss");
    o.get("beta", c.loss.beta);
    o.get("tau", c.loss.tau);
    o.get("alpha", c.loss.alpha);
    o.get("epsilon_tie", c.loss.epsilon_tie);
    o.get("literal_confidence", c.loss.literal_confidence);
    o.finish();
  }
  for (const auto& [key, v] : train_loss_keys) {
    double& slot = key == "beta"    ? c.loss.beta
                   : key == "tau"   ? c.loss.tau
                   : key == "alpha" ? c.loss.alpha
                                    : c.loss.epsilon_tie;
    if (root.has("loss") && root.sub("loss").contains(key) && slot != v) {
      throw ConfigError("train." + key + " conflicts with loss." + key);
    }
    slot = v;
  }
  if (root.has("paths")) {
    StrictObject o(root.sub("paths"), "paths");
    o.get("run_dir", c.paths.run_dir);
    o.get("run_id", c.paths.run_id);
    o.finish();
  }
  std::string mode(to_string(c.mode));
  root.get("mode", mode);
  c.mode = labeling_mode_from_string(mode);
  root.get("suites", c.suites);
  root.get("workers", c.workers);
  root.finish();
  c.validate();
  return c;
}

json parse_override_value(const std::string& value) {
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) return json(value);
  return v;
}

void apply_override(json& j, const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty override key");
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + key + "'");
    if (!node->is_object()) {
      throw ConfigError("override '" + key + "' descends into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  apply_override(j, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::optional<json> lookup(const json& j, const std::string& key) {
  const json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(part)) return std::nullopt;
    node = &node->at(part);
    if (dot == std::string::npos) return std::optional<json>(std::in_place, *node);
    start = dot + 1;
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides) {
  json j = json::object();
  if (path) {
    try {
      j = read_json_file(*path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

}  // namespace scir
