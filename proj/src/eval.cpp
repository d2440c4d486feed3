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

#include "scir/eval.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "scir/error.hpp"
#include "scir/json_util.hpp"
#include "scir/parallel.hpp"

namespace scir {

using nlohmann::json;

std::vector<PreferenceVerdict> compute_verdicts(
    const Model& policy, const Model& global_ref,
    std::span<const PreferencePair> pairs, const RewardSettings& settings,
    int workers) {
  return parallel_map(pairs.size(), workers, [&](std::size_t i) {
    const PreferencePair& p = pairs[i];
    RefScores refs;
    refs.global_a = sequence_logprob(global_ref, p.prompt, p.response_a);
    refs.global_b = sequence_logprob(global_ref, p.prompt, p.response_b);
    return compute_verdict(policy, p, refs, settings);
  });
}

namespace {

bool labels_comparable(const PreferenceVerdict& v) {
  return v.grm_position_consistent && v.label_irm != Label::kUndefined &&
         v.label_grm != Label::kUndefined;
}

bool gate_open(const PreferenceVerdict& v) {
  return labels_comparable(v) && v.label_irm == v.label_grm;
}

bool matches(Label l, GoldLabel g) {
  return (l == Label::kA && g == GoldLabel::kA) ||
         (l == Label::kB && g == GoldLabel::kB);
}

}  // namespace

RateResult consistency_rate(std::span<const PreferenceVerdict> verdicts) {
  RateResult r;
  r.n_total = verdicts.size();
  std::size_t agree = 0;
  for (const auto& v : verdicts) {
    if (!labels_comparable(v)) continue;
    ++r.n_valid;
    if (v.label_irm == v.label_grm) ++agree;
  }
  if (r.n_valid > 0) {
    r.value = static_cast<double>(agree) / static_cast<double>(r.n_valid);
  }
  return r;
}

RateResult inconsistency_rate(std::span<const PreferenceVerdict> verdicts) {
  RateResult r = consistency_rate(verdicts);
  if (r.value) r.value = 1.0 - *r.value;
  return r;
}

std::string_view to_string(ScorerMode m) {
  switch (m) {
    case ScorerMode::kIrm:
      return "irm";
    case ScorerMode::kGrm:
      return "grm";
    case ScorerMode::kConsistent:
      break;
  }
  return "consistent";
}

RateResult reward_accuracy(std::span<const PreferenceVerdict> verdicts,
                           std::span<const PreferencePair> gold_pairs,
                           ScorerMode mode) {
  if (verdicts.size() != gold_pairs.size()) {
    throw InvalidArgument("reward_accuracy needs one verdict per gold pair");
  }
  RateResult r;
  r.n_total = verdicts.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& gold = gold_pairs[i].gold_label;
    if (!gold || *gold == GoldLabel::kTie) {
      throw InvalidArgument("gold pair '" + gold_pairs[i].id +
                            "' has no decisive gold label");
    }
    const auto& v = verdicts[i];
    Label l = Label::kUndefined;
    switch (mode) {
      case ScorerMode::kIrm:
        l = v.label_irm;
        break;
      case ScorerMode::kGrm:
        l = v.label_grm;
        break;
      case ScorerMode::kConsistent:
        if (gate_open(v)) l = v.label_irm;
        break;
    }
    if (l == Label::kUndefined) continue;
    ++r.n_valid;
    if (matches(l, *gold)) ++correct;
  }
  if (r.n_valid > 0) {
    r.value = static_cast<double>(correct) / static_cast<double>(r.n_valid);
  }
  return r;
}

WinRateReport winrate_report(const Model& policy_a, const Model& policy_b,
                             std::span<const TaskInstance> prompts, int max_len,
                             int workers) {
  if (prompts.empty()) throw InvalidArgument("winrate_report needs prompts");
  struct Outcome {
    GoldLabel label = GoldLabel::kTie;
    std::size_t len_a = 0;
    std::size_t len_b = 0;
  };
  auto outcomes = parallel_map(prompts.size(), workers, [&](std::size_t i) {
    const TaskInstance& inst = prompts[i];
    const TokenSeq a = greedy_response(policy_a, inst.prompt, max_len);
    const TokenSeq b = greedy_response(policy_b, inst.prompt, max_len);
    return Outcome{gold_preference(inst, a, b), a.size(), b.size()};
  });
  WinRateReport r;
  double len_a = 0.0;
  double len_b = 0.0;
  for (const auto& o : outcomes) {
    if (o.label == GoldLabel::kA) ++r.wins;
    if (o.label == GoldLabel::kB) ++r.losses;
    if (o.label == GoldLabel::kTie) ++r.ties;
    len_a += static_cast<double>(o.len_a);
    len_b += static_cast<double>(o.len_b);
  }
  const auto n = static_cast<double>(outcomes.size());
  r.avg_len_a = len_a / n;
  r.avg_len_b = len_b / n;
  if (r.wins + r.losses > 0) {
    r.win_rate = static_cast<double>(r.wins) /
                 static_cast<double>(r.wins + r.losses);
  }
  return r;
}

// --- metrics files ------------------------------------------------------------

json to_json(const MetricsRecord& r) {
  return json{{"run_id", r.run_id},
              {"iteration", r.iteration},
              {"dataset", r.dataset},
              {"metric", r.metric},
              {"value", r.value ? json(*r.value) : json(nullptr)},
              {"n_valid", r.n_valid},
              {"n_total", r.n_total}};
}

MetricsRecord metrics_record_from_json(const json& j) {
  MetricsRecord r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.iteration = j.at("iteration").get<int>();
    r.dataset = j.at("dataset").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    if (!j.at("value").is_null()) r.value = j.at("value").get<double>();
    r.n_valid = j.at("n_valid").get<std::size_t>();
    r.n_total = j.at("n_total").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed metrics record: ") + e.what());
  }
  if (r.n_valid > r.n_total) throw IoError("metrics record with n_valid > n_total");
  return r;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& jsonl) {
  std::vector<MetricsRecord> out;
  if (!std::filesystem::exists(jsonl)) return out;
  for (const auto& j : read_jsonl(jsonl)) out.push_back(metrics_record_from_json(j));
  return out;
}

void write_metrics_csv(const std::filesystem::path& csv,
                       std::span<const MetricsRecord> records) {
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + csv.string());
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.iteration << ',' << r.dataset << ',' << r.metric << ',';
    if (r.value) {
      std::ostringstream v;
      v << std::setprecision(17) << *r.value;
      out << v.str();
    }
    out << ',' << r.n_valid << ',' << r.n_total << '\n';
  }
  if (!out) throw IoError("write failed: " + csv.string());
}

void emit_metrics(const std::filesystem::path& jsonl,
                  std::span<const MetricsRecord> records) {
  auto existing = read_metrics(jsonl);
  using Key = std::tuple<std::string, int, std::string, std::string>;
  std::set<Key> keys;
  for (const auto& r : existing) keys.insert({r.run_id, r.iteration, r.dataset, r.metric});
  for (const auto& r : records) {
    if (r.n_valid > r.n_total) {
      throw InvalidArgument("metric '" + r.metric + "' has n_valid > n_total");
    }
    if (!keys.insert({r.run_id, r.iteration, r.dataset, r.metric}).second) {
      throw InvalidArgument("duplicate metric '" + r.metric + "' for run '" +
                            r.run_id + "' iteration " +
                            std::to_string(r.iteration) + " dataset '" +
                            r.dataset + "'");
    }
  }
  if (!jsonl.parent_path().empty()) {
    std::filesystem::create_directories(jsonl.parent_path());
  }
  {
    std::ofstream out(jsonl, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + jsonl.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw IoError("write failed: " + jsonl.string());
  }
  existing.insert(existing.end(), records.begin(), records.end());
  auto csv = jsonl;
  csv.replace_extension(".csv");
  write_metrics_csv(csv, existing);
}

MetricsRecord rate_record(const std::string& run_id, int iteration,
                          const std::string& dataset, const std::string& metric,
                          const RateResult& r) {
  return MetricsRecord{run_id, iteration, dataset, metric, r.value, r.n_valid,
                       r.n_total};
}

}  // namespace scir
