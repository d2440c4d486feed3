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

#ifndef SCIR_SELFREWARD_HPP_
#define SCIR_SELFREWARD_HPP_

// Iterative self-rewarding loop. Each iteration samples k responses per prompt
// from M_t, forms pairs, labels them according to the run mode and trains
// M_{t+1}. In SCIR mode the pairs stay unlabelled; labels are recomputed from
// the current parameters at every optimizer step.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/eval.hpp"
#include "scir/lm.hpp"
#include "scir/losses.hpp"
#include "scir/optim.hpp"
#include "scir/preference.hpp"
#include "scir/rewards.hpp"
#include "scir/tasks.hpp"

namespace scir {

enum class LabelingMode { kScir, kSrlmJudgePointwise, kSrlmIrm, kExternalGold };

std::string_view to_string(LabelingMode m);
LabelingMode labeling_mode_from_string(std::string_view s);

struct AblationFlags {
  bool no_consistency = false;
  bool no_dcpo_gate = false;
  bool single_judge_prompt = false;
  bool no_length_reg = false;
  bool no_adaptive_ref = false;

  bool any() const {
    return no_consistency || no_dcpo_gate || single_judge_prompt ||
           no_length_reg || no_adaptive_ref;
  }
};

struct TrainConfig {
  double alpha_l_grm = 0.02;
  double alpha_l_irm = 0.0;
  int k_responses = 4;
  double temperature = 0.7;
  double top_p = 0.9;
  int max_response_len = 10;
  int epochs_per_iteration = 2;
  int iterations = 3;
  std::size_t prompts_per_iteration = 256;
  // Desk value; large pretrained models are typically tuned near 5e-7.
  double learning_rate = 3e-4;
  int batch_size = 8;
  AdamWConfig adamw;
  std::uint64_t master_seed = 7;
  AblationFlags ablations;

  void validate() const;
};

// Effective objective after the ablation flags are applied.
LossConfig effective_loss(const LossConfig& loss, const TrainConfig& train);
ScirOptions effective_options(const TrainConfig& train);
RewardSettings effective_rewards(const LossConfig& loss, const TrainConfig& train);

// --- pipeline steps -------------------------------------------------------------

// k samples per prompt; item (i, j) draws from its own RNG stream.
std::vector<std::vector<TokenSeq>> generate_responses(
    const Model& model, std::span<const TaskInstance> prompts, int k,
    double temperature, double top_p, int max_len, std::uint64_t seed,
    int workers);

// Scores used by the baseline pair formation; higher is better.
using ResponseScorer =
    std::function<double(std::size_t prompt_index, const TokenSeq& response)>;

// SCIR: two distinct responses drawn uniformly per prompt. Baselines: the
// highest- and lowest-scoring responses, skipped on a score tie. Prompts with
// fewer than two distinct responses are skipped.
std::vector<PreferencePair> form_pairs(
    std::span<const TaskInstance> prompts,
    const std::vector<std::vector<TokenSeq>>& responses, LabelingMode mode,
    const ResponseScorer& scorer, std::uint64_t seed,
    const std::string& id_prefix);

// Fills agreed_label for baseline modes and drops pairs without a defined
// label. SCIR pairs are returned unlabelled.
struct LabelContext {
  const Model* policy = nullptr;
  const Model* global_ref = nullptr;
  std::span<const TaskInstance> instances;
  RewardSettings rewards;
  int workers = 1;
};
std::vector<PreferencePair> label_pairs(std::vector<PreferencePair> pairs,
                                        LabelingMode mode,
                                        const LabelContext& ctx);

struct StepStats {
  int epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t batch = 0;
  std::size_t gated = 0;  // pairs with a DPO term (SCIR)
  std::size_t global_refs = 0;
  double mean_consistency = 0.0;
};

nlohmann::json to_json(const StepStats& s);

struct TrainingResult {
  Model model;
  std::vector<StepStats> steps;
};

// Two-stage failure diagnostics: a non-finite loss writes the offending
// batch, parameters summary and step stats to `dump_path` (when set) and
// throws NumericError.
TrainingResult run_training_epochs(const Model& start, const ReferenceSet& refs,
                                   std::span<const PreferencePair> pairs,
                                   LabelingMode mode, const LossConfig& loss,
                                   const TrainConfig& config,
                                   std::uint64_t seed,
                                   const std::filesystem::path& dump_path = {});

// --- orchestration --------------------------------------------------------------

struct RunInputs {
  Model m0;
  Model global_ref;  // the model supervised fine-tuning started from
  std::vector<std::vector<TaskInstance>> pools;  // one per iteration, plus one
  std::vector<PreferencePair> gold_pairs;
  std::vector<TaskInstance> heldout;  // win-rate prompts for the final model
};

struct RunSettings {
  std::filesystem::path run_dir;
  std::string run_id = "run";
  LabelingMode mode = LabelingMode::kScir;
  LossConfig loss;
  TrainConfig train;
  int workers = 1;
  std::function<void(const std::string&)> log;
};

struct IterationSummary {
  int iteration = 0;
  std::size_t pairs = 0;
  std::optional<double> consistency_new;
  std::string checkpoint_sha;
};

// Writes checkpoints/M_{t+1}, data/D_t.jsonl, data/verdicts_t.jsonl,
// metrics/iteration_t.jsonl for t < iterations, then metrics/final.jsonl for
// the last checkpoint. Returns one summary per trained iteration.
std::vector<IterationSummary> run_iterations(const RunInputs& inputs,
                                             const RunSettings& settings);

// Random distinct-response pairs over the responses of `model`, the probe set
// every mode is measured on.
std::vector<PreferencePair> probe_pairs(const Model& model,
                                        std::span<const TaskInstance> pool,
                                        const TrainConfig& config,
                                        std::uint64_t seed, int workers,
                                        const std::string& id_prefix);

nlohmann::json pair_to_json(const PreferencePair& p);
PreferencePair pair_from_json(const nlohmann::json& j);

}  // namespace scir

#endif  // SCIR_SELFREWARD_HPP_
