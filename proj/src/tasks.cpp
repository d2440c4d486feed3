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

#include "scir/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scir/error.hpp"

namespace scir {

using nlohmann::json;

std::string_view to_string(TaskOp op) {
  switch (op) {
    case TaskOp::kCopy:
      return "copy";
    case TaskOp::kReverse:
      return "reverse";
    case TaskOp::kSort:
      break;
  }
  return "sort";
}

namespace {

Token op_token(TaskOp op) {
  switch (op) {
    case TaskOp::kCopy:
      return tok::kOpCopy;
    case TaskOp::kReverse:
      return tok::kOpReverse;
    case TaskOp::kSort:
      break;
  }
  return tok::kOpSort;
}

std::optional<TaskOp> op_from_token(Token t) {
  if (t == tok::kOpCopy) return TaskOp::kCopy;
  if (t == tok::kOpReverse) return TaskOp::kReverse;
  if (t == tok::kOpSort) return TaskOp::kSort;
  return std::nullopt;
}

}  // namespace

void TaskConfig::validate() const {
  if (digits < 2 || digits > tok::kMaxDigits) {
    throw ConfigError("tasks.digits must lie in [2, " +
                      std::to_string(tok::kMaxDigits) + "]");
  }
  if (min_len < 1 || max_len < min_len) {
    throw ConfigError("tasks.min_len/max_len must satisfy 1 <= min <= max");
  }
}

TokenSeq apply_op(TaskOp op, const TokenSeq& input) {
  TokenSeq out = input;
  if (op == TaskOp::kReverse) std::reverse(out.begin(), out.end());
  if (op == TaskOp::kSort) std::sort(out.begin(), out.end());
  return out;
}

TaskInstance make_instance(TaskOp op, TokenSeq input) {
  TaskInstance inst;
  inst.op = op;
  inst.prompt.push_back(op_token(op));
  inst.prompt.insert(inst.prompt.end(), input.begin(), input.end());
  inst.prompt.push_back(tok::kSep);
  inst.gold_output = apply_op(op, input);
  inst.input = std::move(input);
  return inst;
}

std::optional<std::pair<TaskOp, TokenSeq>> parse_prompt(const TokenSeq& prompt) {
  if (prompt.size() < 2 || prompt.back() != tok::kSep) return std::nullopt;
  const auto op = op_from_token(prompt.front());
  if (!op) return std::nullopt;
  TokenSeq input(prompt.begin() + 1, prompt.end() - 1);
  for (Token t : input) {
    if (!tok::is_digit(t)) return std::nullopt;
  }
  return std::make_pair(*op, std::move(input));
}

double enumerable_count(const TaskConfig& config) {
  double per_op = 0.0;
  for (int len = config.min_len; len <= config.max_len; ++len) {
    per_op += std::pow(static_cast<double>(config.digits), len);
  }
  return 3.0 * per_op;
}

std::vector<TaskInstance> gen_corpus(std::size_t n, std::uint64_t seed,
                                     const TaskConfig& config) {
  config.validate();
  if (n < 1) throw InvalidArgument("gen_corpus requires n >= 1");
  const double per_op_capacity = enumerable_count(config) / 3.0;
  if (static_cast<double>((n + 2) / 3) > per_op_capacity) {
    throw InvalidArgument("requested " + std::to_string(n) +
                          " prompts but the task config only has " +
                          std::to_string(static_cast<long long>(
                              enumerable_count(config))) +
                          " distinct instances");
  }
  Rng rng(derive_seed(seed, hash_label("gen_corpus")));
  std::set<TokenSeq> seen;
  std::vector<TaskInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TaskOp op = static_cast<TaskOp>(i % 3);
    for (;;) {
      const int len = rng.range(config.min_len, config.max_len);
      TokenSeq input(static_cast<std::size_t>(len));
      for (Token& t : input) t = tok::digit(rng.range(0, config.digits - 1));
      TaskInstance inst = make_instance(op, std::move(input));
      if (seen.insert(inst.prompt).second) {
        out.push_back(std::move(inst));
        break;
      }
    }
  }
  return out;
}

std::size_t levenshtein(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

TokenSeq response_content(const TokenSeq& response) {
  const auto end = std::find(response.begin(), response.end(), tok::kEos);
  return TokenSeq(response.begin(), end);
}

double gold_score(const TaskInstance& instance, const TokenSeq& response) {
  const TokenSeq content = response_content(response);
  const double dist =
      static_cast<double>(levenshtein(content, instance.gold_output));
  const double excess =
      std::max(0.0, static_cast<double>(content.size()) -
                        static_cast<double>(instance.gold_output.size()));
  return -dist - kExcessLengthPenalty * excess;
}

GoldLabel gold_preference(const TaskInstance& instance, const TokenSeq& a,
                          const TokenSeq& b) {
  const double sa = gold_score(instance, a);
  const double sb = gold_score(instance, b);
  if (sa > sb) return GoldLabel::kA;
  if (sb > sa) return GoldLabel::kB;
  return GoldLabel::kTie;
}

TokenSeq corrupt(const TokenSeq& content, int edits, int digits, Rng& rng) {
  TokenSeq out = content;
  auto random_digit = [&] { return tok::digit(rng.range(0, digits - 1)); };
  for (int e = 0; e < edits; ++e) {
    const int kind = rng.range(0, 4);
    const auto n = static_cast<int>(out.size());
    if (kind == 0 && n > 0) {  // substitute
      const int i = rng.range(0, n - 1);
      Token t = random_digit();
      while (t == out[static_cast<std::size_t>(i)] && digits > 1) t = random_digit();
      out[static_cast<std::size_t>(i)] = t;
    } else if (kind == 1 && n > 1) {  // delete
      out.erase(out.begin() + rng.range(0, n - 1));
    } else if (kind == 2) {  // insert
      out.insert(out.begin() + rng.range(0, n), random_digit());
    } else if (kind == 3 && n > 1) {  // swap adjacent
      const int i = rng.range(0, n - 2);
      std::swap(out[static_cast<std::size_t>(i)],
                out[static_cast<std::size_t>(i + 1)]);
    } else if (n > 0) {  // repeat last
      out.push_back(out.back());
    } else {
      out.push_back(random_digit());
    }
  }
  return out;
}

TokenSeq synthetic_response(const TaskInstance& instance, int digits, Rng& rng) {
  TokenSeq content = instance.gold_output;
  const double u = rng.uniform();
  if (u >= 0.3) {
    const int edits = u < 0.65 ? 1 : (u < 0.88 ? 2 : 3);
    content = corrupt(content, edits, digits, rng);
  }
  content.push_back(tok::kEos);
  return content;
}

// --- datasets ---------------------------------------------------------------------

json to_json(const SftRecord& r) {
  return json{{"kind", r.kind},
              {"prompt_tokens", r.prompt},
              {"target_tokens", r.target},
              {"meta", r.meta}};
}

SftRecord sft_record_from_json(const json& j) {
  SftRecord r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.prompt = j.at("prompt_tokens").get<TokenSeq>();
    r.target = j.at("target_tokens").get<TokenSeq>();
    r.meta = j.value("meta", json::object());
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed SFT record: ") + e.what());
  }
  if (r.kind != "task" && r.kind != "judge_pair" && r.kind != "judge_point") {
    throw IoError("unknown SFT record kind '" + r.kind + "'");
  }
  return r;
}

int quality_score(const TaskInstance& instance, const TokenSeq& response) {
  const auto dist =
      levenshtein(response_content(response), instance.gold_output);
  return static_cast<int>(std::clamp<long>(5 - static_cast<long>(dist), 1, 5));
}

namespace {

// Two distinct synthetic candidates with a strict gold preference.
std::optional<std::pair<TokenSeq, TokenSeq>> draw_decisive_pair(
    const TaskInstance& inst, int digits, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    TokenSeq a = synthetic_response(inst, digits, rng);
    TokenSeq b = synthetic_response(inst, digits, rng);
    if (a == b) continue;
    if (gold_preference(inst, a, b) == GoldLabel::kTie) continue;
    return std::make_pair(std::move(a), std::move(b));
  }
  return std::nullopt;
}

}  // namespace

std::vector<SftRecord> build_sft_dataset(const std::vector<TaskInstance>& prompts,
                                         const SftCounts& counts,
                                         const TaskConfig& config,
                                         std::uint64_t seed) {
  config.validate();
  if (prompts.empty()) throw InvalidArgument("build_sft_dataset needs prompts");
  std::vector<SftRecord> out;
  Rng rng(derive_seed(seed, hash_label("build_sft_dataset")));

  for (std::size_t i = 0; i < counts.task_demos; ++i) {
    const auto& inst = prompts[i % prompts.size()];
    TokenSeq target = inst.gold_output;
    target.push_back(tok::kEos);
    out.push_back({"task", inst.prompt, std::move(target),
                   json{{"op", to_string(inst.op)}}});
  }

  std::size_t made = 0;
  std::size_t cursor = 0;
  const std::size_t budget = counts.judge_pairs * 8 + prompts.size();
  while (made < counts.judge_pairs) {
    if (cursor >= budget) {
      throw InvalidArgument("insufficient distinct non-tie pairs for judge demos");
    }
    const auto& inst = prompts[cursor++ % prompts.size()];
    auto pair = draw_decisive_pair(inst, config.digits, rng);
    if (!pair) continue;
    const auto& [a, b] = *pair;
    const GoldLabel gold = gold_preference(inst, a, b);
    const std::string pair_id = "sft" + std::to_string(made);
    for (const auto& variant : kJudgeVariants) {
      const auto& tpl = judge_template(variant.id);
      const bool ab = variant.order == Order::kAB;
      const TokenSeq& first = ab ? a : b;
      const TokenSeq& second = ab ? b : a;
      const bool first_wins = (gold == GoldLabel::kA) == ab;
      out.push_back(
          {"judge_pair", tpl.fill(inst.prompt, first, second),
           TokenSeq{first_wins ? tpl.verdict_first : tpl.verdict_second},
           json{{"pair_id", pair_id},
                {"template", to_string(variant.id)},
                {"order", to_string(variant.order)},
                {"gold_label", to_string(gold)}}});
    }
    ++made;
  }

  const PointwiseTemplate point;
  for (std::size_t i = 0; i < counts.point_demos; ++i) {
    const auto& inst = prompts[(i * 7 + 3) % prompts.size()];
    TokenSeq resp = synthetic_response(inst, config.digits, rng);
    const int score = quality_score(inst, resp);
    out.push_back({"judge_point", point.fill(inst.prompt, resp),
                   TokenSeq{point.score_token(score)},
                   json{{"score", score}}});
  }
  return out;
}

std::vector<PreferencePair> make_gold_pairs(
    const std::vector<TaskInstance>& prompts, const TaskConfig& config,
    std::uint64_t seed) {
  Rng rng(derive_seed(seed, hash_label("make_gold_pairs")));
  std::vector<PreferencePair> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& inst = prompts[i];
    auto pair = draw_decisive_pair(inst, config.digits, rng);
    if (!pair) continue;
    PreferencePair p;
    p.id = "gold" + std::to_string(i);
    p.prompt = inst.prompt;
    p.response_a = std::move(pair->first);
    p.response_b = std::move(pair->second);
    p.gold_label = gold_preference(inst, p.response_a, p.response_b);
    out.push_back(std::move(p));
  }
  return out;
}

CorpusSplits make_splits(const TaskConfig& config, const SplitSizes& sizes,
                         std::uint64_t seed) {
  const std::size_t total = sizes.sft + sizes.per_iteration * sizes.pools +
                            sizes.heldout + sizes.gold_pairs;
  auto corpus = gen_corpus(total, seed, config);
  CorpusSplits s;
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    std::vector<TaskInstance> part(corpus.begin() + static_cast<std::ptrdiff_t>(at),
                                   corpus.begin() + static_cast<std::ptrdiff_t>(at + n));
    at += n;
    return part;
  };
  // Pools come last so the other splits do not move with the pool count.
  s.sft = take(sizes.sft);
  s.heldout = take(sizes.heldout);
  s.gold_pair_prompts = take(sizes.gold_pairs);
  for (std::size_t p = 0; p < sizes.pools; ++p) {
    s.iteration_pools.push_back(take(sizes.per_iteration));
  }
  return s;
}

const TaskInstance* find_instance(const std::vector<TaskInstance>& pool,
                                  const TokenSeq& prompt) {
  for (const auto& inst : pool) {
    if (inst.prompt == prompt) return &inst;
  }
  return nullptr;
}

}  // namespace scir
