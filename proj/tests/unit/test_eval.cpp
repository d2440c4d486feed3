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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "oracle.hpp"
#include "scir/error.hpp"
#include "scir/eval.hpp"

using namespace scir;
namespace fs = std::filesystem;

namespace {

PreferenceVerdict verdict(Label irm, Label grm, bool consistent) {
  PreferenceVerdict v;
  v.label_irm = irm;
  v.label_grm = grm;
  v.grm_position_consistent = consistent;
  return v;
}

PreferencePair gold_pair(GoldLabel g) {
  PreferencePair p;
  p.id = "g";
  p.prompt = {2, 5, 1};
  p.response_a = {5, 0};
  p.response_b = {6, 0};
  p.gold_label = g;
  return p;
}

// Forced model whose greedy decode after `prompt` follows `chain`.
Model chain_model(const TokenSeq& prompt, const TokenSeq& chain) {
  std::vector<std::vector<oracle::Real>> l(33, std::vector<oracle::Real>(33, 0.0L));
  Token prev = prompt.back();
  for (Token t : chain) {
    l[static_cast<std::size_t>(prev)][static_cast<std::size_t>(t)] = 8.0L;
    prev = t;
  }
  return oracle::build_forced_model(oracle::BigramTable(l), 24, 3.0, 1);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scir_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("consistency_rate counts agreement on the comparable subset") {
  const std::vector<PreferenceVerdict> v{
      verdict(Label::kA, Label::kA, true), verdict(Label::kB, Label::kB, true),
      verdict(Label::kA, Label::kA, true), verdict(Label::kA, Label::kB, true),
      verdict(Label::kA, Label::kB, false), verdict(Label::kUndefined, Label::kA, true)};
  const auto r = consistency_rate(v);
  REQUIRE(r.value);
  CHECK(*r.value == 0.75);
  CHECK(r.n_valid == 4);
  CHECK(r.n_total == 6);
  const auto inv = inconsistency_rate(v);
  CHECK(*inv.value + *r.value == 1.0);
  CHECK(inv.n_valid == r.n_valid);

  const std::vector<PreferenceVerdict> none{verdict(Label::kA, Label::kA, false),
                                            verdict(Label::kB, Label::kB, false)};
  const auto empty = consistency_rate(none);
  CHECK_FALSE(empty.value);
  CHECK(empty.n_valid == 0);
}

TEST_CASE("reward_accuracy by scorer mode") {
  std::vector<PreferencePair> gold;
  std::vector<PreferenceVerdict> v;
  for (int i = 0; i < 10; ++i) {
    const GoldLabel g = i % 2 == 0 ? GoldLabel::kA : GoldLabel::kB;
    gold.push_back(gold_pair(g));
    const Label right = g == GoldLabel::kA ? Label::kA : Label::kB;
    v.push_back(verdict(right, i < 4 ? Label::kUndefined : right, true));
  }
  const auto irm = reward_accuracy(v, gold, ScorerMode::kIrm);
  CHECK(*irm.value == 1.0);
  CHECK(irm.n_valid == 10);
  const auto grm = reward_accuracy(v, gold, ScorerMode::kGrm);
  CHECK(*grm.value == 1.0);
  CHECK(grm.n_valid == 6);
  const auto cons = reward_accuracy(v, gold, ScorerMode::kConsistent);
  CHECK(cons.n_valid <= std::min(irm.n_valid, grm.n_valid));

  std::vector<PreferencePair> bad{gold_pair(GoldLabel::kTie)};
  std::vector<PreferenceVerdict> one{verdict(Label::kA, Label::kA, true)};
  CHECK_THROWS_AS(reward_accuracy(one, bad, ScorerMode::kIrm), InvalidArgument);
  CHECK_THROWS_AS(reward_accuracy(v, bad, ScorerMode::kIrm), InvalidArgument);
}

TEST_CASE("a coin-flip scorer sits at chance") {
  Rng rng(12);
  const std::size_t n = 4000;
  std::vector<PreferencePair> gold;
  std::vector<PreferenceVerdict> v;
  for (std::size_t i = 0; i < n; ++i) {
    gold.push_back(gold_pair(rng.uniform() < 0.5 ? GoldLabel::kA : GoldLabel::kB));
    const Label coin = rng.uniform() < 0.5 ? Label::kA : Label::kB;
    v.push_back(verdict(coin, coin, true));
  }
  const auto r = reward_accuracy(v, gold, ScorerMode::kIrm);
  CHECK(std::abs(*r.value - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(n)));
}

TEST_CASE("winrate_report") {
  const TaskInstance inst = make_instance(TaskOp::kCopy, {tok::digit(1), tok::digit(3)});
  const std::vector<TaskInstance> prompts{inst};
  const Model gold = chain_model(inst.prompt, {tok::digit(1), tok::digit(3), tok::kEos});
  const Model corrupted = chain_model(inst.prompt, {tok::digit(3), tok::kEos});

  const auto same = winrate_report(gold, gold, prompts, 6, 1);
  CHECK_FALSE(same.win_rate);
  CHECK(same.ties == 1);

  const auto ab = winrate_report(gold, corrupted, prompts, 6, 1);
  REQUIRE(ab.win_rate);
  CHECK(*ab.win_rate == 1.0);
  CHECK(ab.avg_len_a == 3.0);
  CHECK(ab.avg_len_b == 2.0);
  const auto ba = winrate_report(corrupted, gold, prompts, 6, 1);
  CHECK(*ba.win_rate == 1.0 - *ab.win_rate);
  CHECK_THROWS_AS(winrate_report(gold, gold, {}, 6, 1), InvalidArgument);
}

TEST_CASE("emit_metrics files") {
  const fs::path dir = scratch("emit");
  const fs::path jsonl = dir / "metrics" / "iteration_0.jsonl";
  emit_metrics(jsonl, {});
  CHECK(fs::exists(jsonl));
  CHECK(line_count(jsonl) == 0);
  {
    std::ifstream csv(dir / "metrics" / "iteration_0.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == kMetricsCsvHeader);
  }

  std::vector<MetricsRecord> records;
  for (int t = 0; t < 3; ++t) {
    for (const char* ds : {"trained_D_prev", "new_D_t"}) {
      records.push_back(rate_record("run", t, ds, "consistency_rate",
                                    RateResult{0.5, 2, 4}));
    }
  }
  const fs::path all = dir / "all.jsonl";
  emit_metrics(all, records);
  CHECK(line_count(all) == 6);
  CHECK(line_count(dir / "all.csv") == 7);
  CHECK(read_metrics(all).size() == 6);

  CHECK_THROWS_AS(emit_metrics(all, std::span(records.data(), 1)), InvalidArgument);
  CHECK(line_count(all) == 6);

  MetricsRecord null_rate = rate_record("run", 9, "new_D_t", "consistency_rate",
                                        RateResult{std::nullopt, 0, 5});
  emit_metrics(all, std::span(&null_rate, 1));
  const auto back = read_metrics(all);
  CHECK_FALSE(back.back().value);
  CHECK(to_json(back.back()).at("value").is_null());
  fs::remove_all(dir);
}
