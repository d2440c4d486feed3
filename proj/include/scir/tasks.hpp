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

#ifndef SCIR_TASKS_HPP_
#define SCIR_TASKS_HPP_

// Synthetic instruction-following tasks (copy / reverse / sort over a digit
// sub-vocabulary) with a programmatic gold oracle that stands in for human or
// external-model preferences.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/judge_templates.hpp"
#include "scir/preference.hpp"
#include "scir/rng.hpp"
#include "scir/vocab.hpp"

namespace scir {

enum class TaskOp { kCopy, kReverse, kSort };

std::string_view to_string(TaskOp op);

struct TaskConfig {
  int digits = 6;  // size of the digit sub-vocabulary, <= tok::kMaxDigits
  int min_len = 2;
  int max_len = 8;

  void validate() const;
  bool operator==(const TaskConfig&) const = default;
};

struct TaskInstance {
  TaskOp op = TaskOp::kCopy;
  TokenSeq input;
  TokenSeq prompt;       // op token, input digits, separator
  TokenSeq gold_output;  // without the end token
};

TokenSeq apply_op(TaskOp op, const TokenSeq& input);
TaskInstance make_instance(TaskOp op, TokenSeq input);
// Inverse of the prompt layout; nullopt for malformed prompts.
std::optional<std::pair<TaskOp, TokenSeq>> parse_prompt(const TokenSeq& prompt);

// Number of distinct prompts the config can express.
double enumerable_count(const TaskConfig& config);

// Deterministic, duplicate-free; instance i has op (i mod 3).
std::vector<TaskInstance> gen_corpus(std::size_t n, std::uint64_t seed,
                                     const TaskConfig& config);

std::size_t levenshtein(const TokenSeq& a, const TokenSeq& b);
// Drops everything from the first end token on.
TokenSeq response_content(const TokenSeq& response);

inline constexpr double kExcessLengthPenalty = 0.01;

// -(edit distance to gold) - 0.01 * max(0, |content| - |gold|); max is 0.
double gold_score(const TaskInstance& instance, const TokenSeq& response);
GoldLabel gold_preference(const TaskInstance& instance, const TokenSeq& a,
                          const TokenSeq& b);

// Applies `edits` random edit operations (substitute, delete, insert, swap,
// repeat-last) over the digit sub-vocabulary.
TokenSeq corrupt(const TokenSeq& content, int edits, int digits, Rng& rng);
// A plausible candidate response: gold or a corruption of it, plus end token.
TokenSeq synthetic_response(const TaskInstance& instance, int digits, Rng& rng);

// --- datasets ---------------------------------------------------------------------

struct SftCounts {
  std::size_t task_demos = 1200;
  std::size_t judge_pairs = 2000;
  std::size_t point_demos = 300;
};

struct SftRecord {
  std::string kind;  // "task" | "judge_pair" | "judge_point"
  TokenSeq prompt;
  TokenSeq target;
  nlohmann::json meta;
};

nlohmann::json to_json(const SftRecord& r);
SftRecord sft_record_from_json(const nlohmann::json& j);

// Score token (1..5) the pointwise judge demos teach for a response.
int quality_score(const TaskInstance& instance, const TokenSeq& response);

// Three strata: task demos, 4 pairwise judge demos per non-tie pair (both
// templates x both orders), and pointwise score demos. `prompts` is cycled.
std::vector<SftRecord> build_sft_dataset(const std::vector<TaskInstance>& prompts,
                                         const SftCounts& counts,
                                         const TaskConfig& config,
                                         std::uint64_t seed);

// Pairs of synthetic candidates with a non-tie gold label, one per prompt.
std::vector<PreferencePair> make_gold_pairs(
    const std::vector<TaskInstance>& prompts, const TaskConfig& config,
    std::uint64_t seed);

struct CorpusSplits {
  std::vector<TaskInstance> sft;
  std::vector<std::vector<TaskInstance>> iteration_pools;
  std::vector<TaskInstance> heldout;
  std::vector<TaskInstance> gold_pair_prompts;
};

struct SplitSizes {
  std::size_t sft = 1200;
  std::size_t per_iteration = 256;
  std::size_t pools = 4;
  std::size_t heldout = 200;
  std::size_t gold_pairs = 500;
};

// Disjoint partitions of a single corpus.
CorpusSplits make_splits(const TaskConfig& config, const SplitSizes& sizes,
                         std::uint64_t seed);

// Finds the instance whose prompt equals `prompt`.
const TaskInstance* find_instance(const std::vector<TaskInstance>& pool,
                                  const TokenSeq& prompt);

}  // namespace scir

#endif  // SCIR_TASKS_HPP_
