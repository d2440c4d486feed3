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

#include "scir/commands.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fcntl.h>
#include <map>
#include <set>
#include <unistd.h>

#include "scir/checkpoint.hpp"
#include "scir/error.hpp"
#include "scir/eval.hpp"
#include "scir/json_util.hpp"
#include "scir/losses.hpp"
#include "scir/rewards.hpp"
#include "scir/rng.hpp"
#include "scir/selfreward.hpp"
#include "scir/sft.hpp"
#include "scir/tasks.hpp"

namespace scir {

using nlohmann::json;
namespace fs = std::filesystem;

RunDirLock::RunDirLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw LockedError("run directory " + dir.string() +
                        " is locked by another command (remove " +
                        path_.string() + " if no command is running)");
    }
    throw IoError("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunDirLock::~RunDirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

fs::path run_dir(const RunConfig& c) { return fs::path(c.paths.run_dir); }

void say(const LogFn& log, const std::string& m) {
  if (log) log(m);
}

void write_config_copy(const RunConfig& c) {
  write_json_file(run_dir(c) / "config.json", config_to_json(c));
}

TaskOp op_from_string(const std::string& s) {
  for (auto op : {TaskOp::kCopy, TaskOp::kReverse, TaskOp::kSort}) {
    if (to_string(op) == s) return op;
  }
  throw IoError("unknown task op '" + s + "'");
}

json instance_json(const std::string& split, std::size_t index,
                   const TaskInstance& inst) {
  return json{{"split", split},
              {"index", index},
              {"op", to_string(inst.op)},
              {"input", inst.input}};
}

struct LoadedSplits {
  std::map<std::string, std::vector<TaskInstance>> by_split;
  const std::vector<TaskInstance>& get(const std::string& name) const {
    auto it = by_split.find(name);
    if (it == by_split.end()) {
      throw IoError("data/prompts.jsonl has no split '" + name +
                    "'; rerun gen-data with this config");
    }
    return it->second;
  }
};

LoadedSplits load_splits(const RunConfig& c) {
  LoadedSplits out;
  for (const auto& j : read_jsonl(run_dir(c) / "data" / "prompts.jsonl")) {
    try {
      out.by_split[j.at("split").get<std::string>()].push_back(make_instance(
          op_from_string(j.at("op").get<std::string>()),
          j.at("input").get<TokenSeq>()));
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed prompt record: ") + e.what());
    }
  }
  return out;
}

std::vector<PreferencePair> load_gold_pairs(const RunConfig& c) {
  std::vector<PreferencePair> out;
  for (const auto& j : read_jsonl(run_dir(c) / "data" / "gold_pairs.jsonl")) {
    out.push_back(pair_from_json(j));
  }
  return out;
}

std::uint64_t data_seed(const RunConfig& c) {
  return derive_seed(c.train.master_seed, hash_label("data"));
}

// Fraction of prompts whose greedy response is exactly the gold output.
double exact_match(const Model& m, std::span<const TaskInstance> prompts,
                   int max_len) {
  std::size_t hits = 0;
  for (const auto& inst : prompts) {
    if (response_content(greedy_response(m, inst.prompt, max_len)) ==
        inst.gold_output) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(prompts.size());
}

int latest_iteration(const fs::path& ckpt_dir) {
  int best = -1;
  if (!fs::exists(ckpt_dir)) return best;
  for (const auto& e : fs::directory_iterator(ckpt_dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("M_", 0) == 0 && e.path().extension() == ".json") {
      try {
        best = std::max(best, std::stoi(name.substr(2)));
      } catch (const std::exception&) {
      }
    }
  }
  return best;
}

}  // namespace

json cmd_gen_data(const RunConfig& c, const LogFn& log) {
  c.validate();
  RunDirLock lock(run_dir(c));
  write_config_copy(c);
  const std::uint64_t seed = data_seed(c);
  const CorpusSplits s = make_splits(c.tasks, c.split_sizes(), seed);

  std::vector<json> prompts;
  auto add = [&](const std::string& split, const std::vector<TaskInstance>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      prompts.push_back(instance_json(split, i, v[i]));
    }
  };
  add("sft", s.sft);
  add("heldout", s.heldout);
  add("gold", s.gold_pair_prompts);
  for (std::size_t t = 0; t < s.iteration_pools.size(); ++t) {
    add("pool_" + std::to_string(t), s.iteration_pools[t]);
  }
  const fs::path data = run_dir(c) / "data";
  write_jsonl(data / "prompts.jsonl", prompts);

  const auto sft = build_sft_dataset(s.sft, c.sft.counts, c.tasks,
                                     derive_seed(seed, hash_label("sft")));
  std::vector<json> sft_rows;
  sft_rows.reserve(sft.size());
  for (const auto& r : sft) sft_rows.push_back(to_json(r));
  write_jsonl(data / "sft.jsonl", sft_rows);

  const auto gold = make_gold_pairs(s.gold_pair_prompts, c.tasks,
                                    derive_seed(seed, hash_label("gold")));
  std::vector<json> gold_rows;
  for (const auto& p : gold) gold_rows.push_back(pair_to_json(p));
  write_jsonl(data / "gold_pairs.jsonl", gold_rows);

  say(log, "gen-data: " + std::to_string(prompts.size()) + " prompts, " +
               std::to_string(sft.size()) + " SFT records, " +
               std::to_string(gold.size()) + " gold pairs");
  return json{{"command", "gen-data"},
              {"prompts", prompts.size()},
              {"sft_records", sft.size()},
              {"gold_pairs", gold.size()},
              {"pools", s.iteration_pools.size()}};
}

json cmd_sft(const RunConfig& c, const LogFn& log) {
  c.validate();
  RunDirLock lock(run_dir(c));
  write_config_copy(c);
  std::vector<SftRecord> records;
  for (const auto& j : read_jsonl(run_dir(c) / "data" / "sft.jsonl")) {
    records.push_back(sft_record_from_json(j));
  }
  const Model base = make_model(c.model);
  std::vector<json> rows;
  const auto t0 = std::chrono::steady_clock::now();
  SftResult r = run_sft(base, records, c.sft,
                        derive_seed(c.train.master_seed, hash_label("sft")),
                        [&](int epoch, double loss) {
                          rows.push_back(json{{"epoch", epoch}, {"loss", loss}});
                          say(log, "sft epoch " + std::to_string(epoch) +
                                       " loss " + std::to_string(loss));
                        });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_jsonl(run_dir(c) / "logs" / "sft.jsonl", rows);
  const fs::path ckpt = run_dir(c) / "checkpoints";
  const json base_manifest =
      save_checkpoint(ckpt, "base", base, json{{"role", "sft_origin"}});
  const json m0_manifest = save_checkpoint(
      ckpt, "M_0", r.model,
      json{{"parent", "base"}, {"sft_epochs", c.sft.epochs}});
  const auto splits = load_splits(c);
  const double em =
      exact_match(r.model, splits.get("heldout"), c.train.max_response_len);
  say(log, "sft: heldout exact match " + std::to_string(em));
  return json{{"command", "sft"},
              {"records", records.size()},
              {"final_loss", r.epoch_losses.empty() ? json(nullptr)
                                                    : json(r.epoch_losses.back())},
              {"heldout_exact_match", em},
              {"seconds", secs},
              {"base_sha256", base_manifest.at("sha256")},
              {"m0_sha256", m0_manifest.at("sha256")}};
}

json cmd_iterate(const RunConfig& c, const LogFn& log) {
  c.validate();
  RunDirLock lock(run_dir(c));
  write_config_copy(c);
  const fs::path dir = run_dir(c);
  // A rerun replaces the previous lineage.
  for (const auto& sub : {"metrics", "data", "checkpoints", "logs"}) {
    if (!fs::exists(dir / sub)) continue;
    for (const auto& e : fs::directory_iterator(dir / sub)) {
      const std::string name = e.path().filename().string();
      const bool stale =
          (std::string(sub) == "metrics" &&
           (name.rfind("iteration_", 0) == 0 || name.rfind("final.", 0) == 0)) ||
          (std::string(sub) == "data" &&
           (name.rfind("D_", 0) == 0 || name.rfind("verdicts_", 0) == 0)) ||
          (std::string(sub) == "checkpoints" && name.rfind("M_", 0) == 0 &&
           name.rfind("M_0.", 0) != 0) ||
          (std::string(sub) == "logs" && name.rfind("train_", 0) == 0);
      if (stale) fs::remove(e.path());
    }
  }
  const auto splits = load_splits(c);
  RunInputs in;
  in.global_ref = load_checkpoint(dir / "checkpoints", "base").model;
  in.m0 = load_checkpoint(dir / "checkpoints", "M_0").model;
  if (!(in.m0.config == c.model)) {
    throw ConfigError("checkpoint M_0 was trained with a different model config");
  }
  for (int t = 0; t <= c.train.iterations; ++t) {
    in.pools.push_back(splits.get("pool_" + std::to_string(t)));
  }
  in.gold_pairs = load_gold_pairs(c);
  in.heldout = splits.get("heldout");

  RunSettings s;
  s.run_dir = dir;
  s.run_id = c.paths.run_id;
  s.mode = c.mode;
  s.loss = c.loss;
  s.train = c.train;
  s.workers = c.workers;
  s.log = log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto summaries = run_iterations(in, s);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json its = json::array();
  for (const auto& it : summaries) {
    its.push_back(json{{"iteration", it.iteration},
                       {"pairs", it.pairs},
                       {"consistency_new", it.consistency_new
                                               ? json(*it.consistency_new)
                                               : json(nullptr)},
                       {"checkpoint_sha256", it.checkpoint_sha}});
  }
  json final_metrics = json::array();
  for (const auto& r : read_metrics(dir / "metrics" / "final.jsonl")) {
    final_metrics.push_back(to_json(r));
  }
  return json{{"command", "iterate"},
              {"mode", to_string(c.mode)},
              {"iterations", its},
              {"final", final_metrics},
              {"seconds", secs}};
}

json cmd_eval(const RunConfig& c, const std::string& tag_in,
              const std::string& baseline_in, const LogFn& log) {
  c.validate();
  RunDirLock lock(run_dir(c));
  const fs::path ckpt = run_dir(c) / "checkpoints";
  std::string tag = tag_in;
  if (tag.empty()) {
    const int latest = latest_iteration(ckpt);
    if (latest < 0) throw IoError("no M_t checkpoint in " + ckpt.string());
    tag = "M_" + std::to_string(latest);
  }
  const std::string baseline = baseline_in.empty() ? "M_0" : baseline_in;
  const Model policy = load_checkpoint(ckpt, tag).model;
  const Model global_ref = load_checkpoint(ckpt, "base").model;
  int iteration = 0;
  if (tag.rfind("M_", 0) == 0) {
    try {
      iteration = std::stoi(tag.substr(2));
    } catch (const std::exception&) {
    }
  }
  const auto splits = load_splits(c);
  const auto& heldout = splits.get("heldout");
  const RewardSettings rewards = effective_rewards(c.loss, c.train);
  const std::string& run_id = c.paths.run_id;
  std::vector<MetricsRecord> records;
  for (const auto& suite : c.suites) {
    if (suite == "consistency") {
      auto probe = probe_pairs(policy, heldout, c.train,
                               derive_seed(c.train.master_seed, hash_label("eval")),
                               c.workers, "eval_");
      auto v = compute_verdicts(policy, global_ref, probe, rewards, c.workers);
      records.push_back(rate_record(run_id, iteration, "heldout_probe",
                                    "consistency_rate", consistency_rate(v)));
      records.push_back(rate_record(run_id, iteration, "heldout_probe",
                                    "inconsistency_rate", inconsistency_rate(v)));
    } else if (suite == "reward-acc") {
      const auto gold = load_gold_pairs(c);
      auto v = compute_verdicts(policy, global_ref, gold, rewards, c.workers);
      for (auto m : {ScorerMode::kIrm, ScorerMode::kGrm, ScorerMode::kConsistent}) {
        records.push_back(rate_record(run_id, iteration, "heldout_gold",
                                      "reward_accuracy_" + std::string(to_string(m)),
                                      reward_accuracy(v, gold, m)));
      }
    } else if (suite == "winrate") {
      const Model base = load_checkpoint(ckpt, baseline).model;
      WinRateReport w = winrate_report(policy, base, heldout,
                                       c.train.max_response_len, c.workers);
      const std::size_t decided = w.wins + w.losses;
      const std::size_t total = decided + w.ties;
      records.push_back(MetricsRecord{run_id, iteration, "heldout_prompts",
                                      "win_rate_vs_" + baseline, w.win_rate,
                                      decided, total});
      records.push_back(MetricsRecord{run_id, iteration, "heldout_prompts",
                                      "tie_fraction_vs_" + baseline,
                                      static_cast<double>(w.ties) /
                                          static_cast<double>(total),
                                      total, total});
      records.push_back(MetricsRecord{run_id, iteration, "heldout_prompts",
                                      "avg_len_" + tag, w.avg_len_a, total, total});
      records.push_back(MetricsRecord{run_id, iteration, "heldout_prompts",
                                      "avg_len_" + baseline, w.avg_len_b, total,
                                      total});
    }
  }
  const fs::path out = run_dir(c) / "metrics" / ("eval_" + tag + ".jsonl");
  std::error_code ec;
  fs::remove(out, ec);
  auto csv = out;
  fs::remove(csv.replace_extension(".csv"), ec);
  emit_metrics(out, records);
  json rows = json::array();
  for (const auto& r : records) rows.push_back(to_json(r));
  say(log, "eval: " + std::to_string(records.size()) + " metrics for " + tag);
  return json{{"command", "eval"}, {"checkpoint", tag}, {"metrics", rows}};
}

json cmd_gradcheck(const GradcheckOptions& o, const LogFn& log) {
  if (o.instances < 1) throw ConfigError("gradcheck needs at least one instance");
  TaskConfig tasks;
  std::size_t checked = 0;
  std::size_t passed = 0;
  std::size_t blocked = 0;
  std::size_t failed = 0;
  double max_error = 0.0;
  json failures = json::array();
  const double taus[] = {0.5005, 0.55, 0.6, 0.7};
  const auto t0 = std::chrono::steady_clock::now();

  for (int i = 0; i < o.instances; ++i) {
    const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
    Rng rng(seed);
    ModelConfig mc;
    mc.vocab_size = tok::kReservedCount;
    mc.context_len = 40;
    mc.layers = 1;
    mc.model_dim = 16;
    mc.heads = 2;
    mc.mlp_mult = 2;
    mc.seed = seed;
    const Model model = make_model(mc);

    auto corpus = gen_corpus(2, derive_seed(seed, 1), tasks);
    std::vector<PreferencePair> pairs;
    std::vector<RefScores> refs;
    for (std::size_t k = 0; k < corpus.size(); ++k) {
      PreferencePair p;
      p.id = "g" + std::to_string(k);
      p.prompt = corpus[k].prompt;
      p.response_a = synthetic_response(corpus[k], tasks.digits, rng);
      do {
        p.response_b = synthetic_response(corpus[k], tasks.digits, rng);
      } while (p.response_b == p.response_a);
      pairs.push_back(p);
      RefScores r;
      r.global_a = -20.0 * rng.uniform() - 5.0;
      r.global_b = -20.0 * rng.uniform() - 5.0;
      r.local_a = -20.0 * rng.uniform() - 5.0;
      r.local_b = -20.0 * rng.uniform() - 5.0;
      refs.push_back(r);
    }
    LossConfig lc;
    lc.tau = taus[i % 4];
    lc.literal_confidence = (i % 7) == 3;
    ScirOptions so;
    so.dcpo_gate = (i % 2) == 0;
    so.single_judge_prompt = (i % 5) == 4;
    const Label chosen = rng.below(2) == 0 ? Label::kA : Label::kB;
    const PreferencePair pair0 = pairs[0];
    const RefScores ref0 = refs[0];

    const std::vector<std::pair<std::string, grad::ScalarExpr>> exprs{
        {"dpo",
         [=](grad::Tape& tape, grad::Var params) {
           LmGraph g(tape, mc, params);
           return dpo_loss(g, pair0, chosen, ref0.local_a, ref0.local_b, lc.beta);
         }},
        {"consistency",
         [=](grad::Tape& tape, grad::Var params) {
           LmGraph g(tape, mc, params);
           grad::Var p = irm_preference(g, pair0, ref0.global_a, ref0.global_b,
                                        lc.beta, so.alpha_l_irm);
           grad::Var q = grm_preference(g, pair0, so.alpha_l_grm, lc.epsilon_tie,
                                        so.single_judge_prompt)
                             .p;
           return consistency_loss(p, q, lc.tau, lc.literal_confidence);
         }},
        {"scir_batch", scir_batch_expr(mc, pairs, refs, lc, so)},
    };

    grad::GradCheckOptions gco;
    gco.rel_tol = o.rel_tol;
    if (o.entries_per_instance > 0 &&
        o.entries_per_instance < model.params.size()) {
      std::vector<std::size_t> idx(model.params.size());
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(o.entries_per_instance);
      std::sort(idx.begin(), idx.end());
      gco.indices = std::move(idx);
    }
    for (const auto& [name, expr] : exprs) {
      const auto rep = grad::finite_diff_check(expr, model.params, o.h, gco);
      checked += rep.entries.size();
      passed += rep.passed;
      blocked += rep.sg_blocked;
      failed += rep.failed;
      max_error = std::max(max_error, rep.max_error);
      for (const auto& e : rep.entries) {
        if (e.status != grad::EntryStatus::kFail || failures.size() >= 20) continue;
        failures.push_back(json{{"instance", i},
                                {"loss", name},
                                {"index", e.index},
                                {"analytic", e.analytic},
                                {"fd_live", e.fd_live},
                                {"fd_frozen", e.fd_frozen}});
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  say(log, "gradcheck: " + std::to_string(passed) + " passed, " +
               std::to_string(blocked) + " sg-blocked, " +
               std::to_string(failed) + " failed");
  return json{{"command", "gradcheck"},
              {"ok", failed == 0},
              {"instances", o.instances},
              {"entries", checked},
              {"passed", passed},
              {"sg_blocked", blocked},
              {"failed", failed},
              {"max_error", max_error},
              {"tolerance", o.rel_tol},
              {"h", o.h},
              {"seconds", secs},
              {"failures", failures}};
}

json cmd_report(const RunConfig& c, const LogFn& log) {
  c.validate();
  RunDirLock lock(run_dir(c));
  const fs::path metrics = run_dir(c) / "metrics";
  std::vector<fs::path> files;
  if (fs::exists(metrics)) {
    for (const auto& e : fs::directory_iterator(metrics)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricsRecord> all;
  for (const auto& f : files) {
    auto rs = read_metrics(f);
    all.insert(all.end(), rs.begin(), rs.end());
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const MetricsRecord& a, const MetricsRecord& b) {
                     return a.iteration < b.iteration;
                   });
  const fs::path reports = run_dir(c) / "reports";
  fs::create_directories(reports);
  write_metrics_csv(reports / "metrics.csv", all);
  json series = json::object();
  for (const auto& r : all) {
    series[r.metric][r.dataset][std::to_string(r.iteration)] =
        r.value ? json(*r.value) : json(nullptr);
  }
  write_json_file(reports / "series.json", series);
  say(log, "report: " + std::to_string(all.size()) + " records from " +
               std::to_string(files.size()) + " files");
  return json{{"command", "report"},
              {"files", files.size()},
              {"records", all.size()},
              {"csv", (reports / "metrics.csv").string()},
              {"series", series}};
}

}  // namespace scir
