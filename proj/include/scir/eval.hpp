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

#ifndef SCIR_EVAL_HPP_
#define SCIR_EVAL_HPP_

// Measurement suites: IRM/GRM consistency rate, reward accuracy against gold
// labels, and gold-oracle win rate with response lengths. All of them are
// read-only over models and reduce in item order.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/lm.hpp"
#include "scir/preference.hpp"
#include "scir/rewards.hpp"
#include "scir/tasks.hpp"

namespace scir {

// A rate with its support. `value` is empty when nothing was valid.
struct RateResult {
  std::optional<double> value;
  std::size_t n_valid = 0;
  std::size_t n_total = 0;
};

// Verdicts of `policy` on every pair; the IRM uses the global reference.
std::vector<PreferenceVerdict> compute_verdicts(
    const Model& policy, const Model& global_ref,
    std::span<const PreferencePair> pairs, const RewardSettings& settings,
    int workers);

// Valid: GRM position-consistent and both hard labels defined.
RateResult consistency_rate(std::span<const PreferenceVerdict> verdicts);
RateResult inconsistency_rate(std::span<const PreferenceVerdict> verdicts);

enum class ScorerMode { kIrm, kGrm, kConsistent };

std::string_view to_string(ScorerMode m);

// irm / grm: valid when the label is defined. consistent: valid when the gate
// would open (labels agree, defined, GRM position-consistent).
RateResult reward_accuracy(std::span<const PreferenceVerdict> verdicts,
                           std::span<const PreferencePair> gold_pairs,
                           ScorerMode mode);

struct WinRateReport {
  std::optional<double> win_rate;  // wins / (wins + losses)
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double avg_len_a = 0.0;
  double avg_len_b = 0.0;
};

// One greedy response per policy per prompt, judged by gold_score.
WinRateReport winrate_report(const Model& policy_a, const Model& policy_b,
                             std::span<const TaskInstance> prompts, int max_len,
                             int workers);

// --- metrics files ------------------------------------------------------------

struct MetricsRecord {
  std::string run_id;
  int iteration = 0;
  std::string dataset;  // e.g. new_D_t, trained_D_prev, heldout_gold
  std::string metric;
  std::optional<double> value;
  std::size_t n_valid = 0;
  std::size_t n_total = 0;
};

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord metrics_record_from_json(const nlohmann::json& j);

inline constexpr const char* kMetricsCsvHeader =
    "iteration,dataset,metric,value,n_valid,n_total";

// Appends `records` to `jsonl` and rewrites the sibling .csv from the whole
// file. A record whose (run_id, iteration, dataset, metric) key is already
// present, in the file or earlier in `records`, rejects the write.
void emit_metrics(const std::filesystem::path& jsonl,
                  std::span<const MetricsRecord> records);

void write_metrics_csv(const std::filesystem::path& csv,
                       std::span<const MetricsRecord> records);

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& jsonl);

MetricsRecord rate_record(const std::string& run_id, int iteration,
                          const std::string& dataset, const std::string& metric,
                          const RateResult& r);

}  // namespace scir

#endif  // SCIR_EVAL_HPP_
