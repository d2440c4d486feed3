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
#include <set>

#include "oracle.hpp"
#include "scir/checkpoint.hpp"
#include "scir/error.hpp"
#include "scir/selfreward.hpp"

using namespace scir;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.vocab_size = 33;
  c.context_len = 32;
  c.layers = 1;
  c.model_dim = 16;
  c.heads = 2;
  c.mlp_mult = 2;
  c.seed = 3;
  return c;
}

TaskConfig short_tasks() {
  TaskConfig t;
  t.digits = 4;
  t.min_len = 2;
  t.max_len = 4;
  return t;
}

TrainConfig small_train() {
  TrainConfig t;
  t.max_response_len = 5;
  t.prompts_per_iteration = 6;
  t.batch_size = 4;
  t.epochs_per_iteration = 1;
  t.iterations = 2;
  return t;
}

std::vector<TokenSeq> distinct_responses() {
  return {{5, 0}, {6, 0}, {7, 0}, {8, 0}};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scir_selfreward_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate_responses: counts, determinism and greedy limit") {
  const Model m = make_model(small_model());
  const auto prompts = gen_corpus(10, 1, short_tasks());
  const auto a = generate_responses(m, prompts, 4, 0.7, 0.9, 5, 11, 1);
  std::size_t total = 0;
  for (const auto& set : a) total += set.size();
  CHECK(total == 40);
  CHECK(generate_responses(m, prompts, 4, 0.7, 0.9, 5, 11, 1) == a);
  CHECK(generate_responses(m, prompts, 4, 0.7, 0.9, 5, 11, 3) == a);

  const auto cold = generate_responses(m, prompts, 4, 1e-8, 0.9, 5, 11, 1);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (const auto& r : cold[i]) CHECK(r == greedy_response(m, prompts[i].prompt, 5));
  }
  CHECK_THROWS_AS(generate_responses(m, prompts, 1, 0.7, 0.9, 5, 11, 1), InvalidArgument);
}

TEST_CASE("form_pairs: SCIR draws one random distinct pair") {
  const auto prompts = gen_corpus(1, 2, short_tasks());
  const std::vector<std::vector<TokenSeq>> responses{distinct_responses()};
  std::set<std::pair<TokenSeq, TokenSeq>> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto pairs = form_pairs(prompts, responses, LabelingMode::kScir, {}, seed, "p");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].response_a != pairs[0].response_b);
    CHECK_FALSE(pairs[0].agreed_label);
    auto key = std::minmax(pairs[0].response_a, pairs[0].response_b);
    seen.insert({key.first, key.second});
    const auto again = form_pairs(prompts, responses, LabelingMode::kScir, {}, seed, "p");
    CHECK(again[0].response_a == pairs[0].response_a);
    CHECK(again[0].response_b == pairs[0].response_b);
  }
  CHECK(seen.size() == 6);

  const std::vector<std::vector<TokenSeq>> dup{{{5, 0}, {5, 0}, {5, 0}, {5, 0}}};
  CHECK(form_pairs(prompts, dup, LabelingMode::kScir, {}, 1, "p").empty());
}

TEST_CASE("form_pairs: baselines take best against worst and skip ties") {
  const auto prompts = gen_corpus(1, 2, short_tasks());
  const std::vector<std::vector<TokenSeq>> responses{distinct_responses()};
  const ResponseScorer flat = [](std::size_t, const TokenSeq&) { return 3.0; };
  CHECK(form_pairs(prompts, responses, LabelingMode::kSrlmJudgePointwise, flat, 1, "p")
            .empty());
  const ResponseScorer graded = [](std::size_t, const TokenSeq& r) {
    return -static_cast<double>(r[0] - 5);  // 0, -1, -2, -3
  };
  const auto pairs =
      form_pairs(prompts, responses, LabelingMode::kExternalGold, graded, 1, "p");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].response_a == responses[0][0]);
  CHECK(pairs[0].response_b == responses[0][3]);
  CHECK_THROWS_AS(form_pairs(prompts, responses, LabelingMode::kSrlmIrm, {}, 1, "p"),
                  InvalidArgument);
}

TEST_CASE("label_pairs by mode") {
  const TaskInstance inst = make_instance(TaskOp::kCopy, {tok::digit(1), tok::digit(2)});
  const std::vector<TaskInstance> pool{inst};
  PreferencePair gold_vs_bad;
  gold_vs_bad.id = "a";
  gold_vs_bad.prompt = inst.prompt;
  gold_vs_bad.response_a = {tok::digit(2), tok::kEos};
  gold_vs_bad.response_b = {tok::digit(1), tok::digit(2), tok::kEos};
  PreferencePair tie = gold_vs_bad;
  tie.id = "b";
  tie.response_a = {tok::digit(3), tok::digit(2), tok::kEos};
  tie.response_b = {tok::digit(1), tok::digit(3), tok::kEos};

  LabelContext ctx;
  ctx.instances = pool;
  const auto gold = label_pairs({gold_vs_bad, tie}, LabelingMode::kExternalGold, ctx);
  REQUIRE(gold.size() == 1);
  CHECK(gold[0].id == "a");
  CHECK(gold[0].agreed_label == Label::kB);

  PreferencePair labeled = gold_vs_bad;
  labeled.agreed_label = Label::kA;
  const auto scir = label_pairs({labeled}, LabelingMode::kScir, ctx);
  REQUIRE(scir.size() == 1);
  CHECK_FALSE(scir[0].agreed_label);

  // The policy raises the separator -> digit 2 logit by g over a flat
  // reference; only the first tokens of a and b differ, so the log-ratio gap
  // is exactly g and P_irm = sigmoid(beta * g) = 0.7.
  std::vector<std::vector<oracle::Real>> flat(33, std::vector<oracle::Real>(33, 0.0L));
  const Model ref = oracle::build_forced_model(oracle::BigramTable(flat), 32, 3.0, 1);
  auto tilted = flat;
  tilted[tok::kSep][static_cast<std::size_t>(tok::digit(2))] = std::log(7.0L / 3.0L) / 0.1L;
  const Model policy = oracle::build_forced_model(oracle::BigramTable(tilted), 32, 3.0, 1);
  ctx.policy = &policy;
  ctx.global_ref = &ref;
  const auto irm = label_pairs({gold_vs_bad}, LabelingMode::kSrlmIrm, ctx);
  REQUIRE(irm.size() == 1);
  CHECK(irm[0].agreed_label == Label::kA);

  ctx.policy = &ref;
  CHECK(label_pairs({gold_vs_bad}, LabelingMode::kSrlmIrm, ctx).empty());
}

TEST_CASE("training: zero learning rate and closed gates leave M unchanged") {
  const Model m = make_model(small_model());
  const auto prompts = gen_corpus(8, 4, short_tasks());
  const auto responses = generate_responses(m, prompts, 4, 1.5, 1.0, 5, 3, 1);
  const auto pairs = form_pairs(prompts, responses, LabelingMode::kScir, {}, 5, "p");
  REQUIRE_FALSE(pairs.empty());
  ReferenceSet refs{m, m};
  LossConfig loss;

  TrainConfig zero = small_train();
  zero.learning_rate = 0.0;
  const auto still = run_training_epochs(m, refs, pairs, LabelingMode::kScir, loss, zero, 1);
  CHECK(still.model.params == m.params);

  // Policy equal to the global reference: every IRM is exactly 0.5, so the
  // gate never opens, and without the consistency term nothing trains.
  TrainConfig no_cons = small_train();
  no_cons.ablations.no_consistency = true;
  const auto r = run_training_epochs(m, refs, pairs, LabelingMode::kScir, loss, no_cons, 1);
  CHECK(r.model.params == m.params);
  for (const auto& s : r.steps) CHECK(s.gated == 0);

  TrainConfig normal = small_train();
  const auto a = run_training_epochs(m, refs, pairs, LabelingMode::kScir, loss, normal, 9);
  const auto b = run_training_epochs(m, refs, pairs, LabelingMode::kScir, loss, normal, 9);
  CHECK(a.model.params == b.model.params);
  CHECK_THROWS_AS(run_training_epochs(m, refs, {}, LabelingMode::kScir, loss, normal, 9),
                  InvalidArgument);
}

TEST_CASE("run_iterations writes the checkpoint lineage and is deterministic") {
  const Model m0 = make_model(small_model());
  ModelConfig base_cfg = small_model();
  base_cfg.seed = 4;
  RunInputs in;
  in.m0 = m0;
  in.global_ref = make_model(base_cfg);
  const auto corpus = gen_corpus(40, 8, short_tasks());
  for (int p = 0; p < 3; ++p) {
    in.pools.emplace_back(corpus.begin() + p * 8, corpus.begin() + (p + 1) * 8);
  }
  in.gold_pairs = make_gold_pairs({corpus.begin() + 24, corpus.begin() + 32}, short_tasks(), 2);
  in.heldout.assign(corpus.begin() + 32, corpus.end());

  RunSettings s;
  s.train = small_train();
  s.run_dir = scratch("a");
  const auto sums = run_iterations(in, s);
  CHECK(sums.size() == 2);
  for (const char* f : {"checkpoints/M_1.bin", "checkpoints/M_1.json", "checkpoints/M_2.bin",
                        "data/D_0.jsonl", "data/D_1.jsonl", "metrics/iteration_0.jsonl",
                        "metrics/iteration_1.jsonl", "metrics/final.jsonl"}) {
    CHECK(fs::exists(s.run_dir / f));
  }
  RunSettings s2 = s;
  s2.run_dir = scratch("b");
  const auto sums2 = run_iterations(in, s2);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    CHECK(sums[i].checkpoint_sha == sums2[i].checkpoint_sha);
  }
  CHECK(read_metrics(s.run_dir / "metrics/final.jsonl").size() ==
        read_metrics(s2.run_dir / "metrics/final.jsonl").size());

  RunSettings none = s;
  none.train.iterations = 0;
  none.run_dir = scratch("c");
  CHECK(run_iterations(in, none).empty());
  CHECK_FALSE(fs::exists(none.run_dir / "checkpoints/M_1.bin"));

  RunInputs short_pools = in;
  short_pools.pools.resize(2);
  RunSettings three = s;
  three.train.iterations = 3;
  CHECK_THROWS_AS(run_iterations(short_pools, three), InvalidArgument);
  for (const auto& d : {s.run_dir, s2.run_dir, none.run_dir}) fs::remove_all(d);
}
