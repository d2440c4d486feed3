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

#include "scir/selfreward.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "scir/checkpoint.hpp"
#include "scir/error.hpp"
#include "scir/json_util.hpp"
#include "scir/parallel.hpp"
#include "scir/rng.hpp"

namespace scir {

using grad::Tape;
using grad::Var;
using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(LabelingMode m) {
  switch (m) {
    case LabelingMode::kScir:
      return "scir";
    case LabelingMode::kSrlmJudgePointwise:
      return "srlm_judge_pointwise";
    case LabelingMode::kSrlmIrm:
      return "srlm_irm";
    case LabelingMode::kExternalGold:
      break;
  }
  return "external_gold";
}

LabelingMode labeling_mode_from_string(std::string_view s) {
  for (auto m : {LabelingMode::kScir, LabelingMode::kSrlmJudgePointwise,
                 LabelingMode::kSrlmIrm, LabelingMode::kExternalGold}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + std::string(s) +
                    "' (expected scir, srlm_judge_pointwise, srlm_irm or "
                    "external_gold)");
}

void TrainConfig::validate() const {
  if (alpha_l_grm < 0.0) throw ConfigError("train.alpha_l_grm must be >= 0");
  if (alpha_l_irm < 0.0) throw ConfigError("train.alpha_l_irm must be >= 0");
  if (k_responses < 2) throw ConfigError("train.k_responses must be >= 2");
  if (!(temperature > 0.0)) throw ConfigError("train.temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("train.top_p must be in (0, 1]");
  if (max_response_len < 1) throw ConfigError("train.max_response_len must be >= 1");
  if (epochs_per_iteration < 1) {
    throw ConfigError("train.epochs_per_iteration must be >= 1");
  }
  if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (prompts_per_iteration < 1) {
    throw ConfigError("train.prompts_per_iteration must be >= 1");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0) ||
      !(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0)) {
    throw ConfigError("train.adam_beta1/adam_beta2 must be in [0, 1)");
  }
  if (!(adamw.eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (!(adamw.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
}

LossConfig effective_loss(const LossConfig& loss, const TrainConfig& train) {
  LossConfig out = loss;
  if (train.ablations.no_consistency) out.alpha = 0.0;
  return out;
}

ScirOptions effective_options(const TrainConfig& train) {
  ScirOptions o;
  const bool lr = !train.ablations.no_length_reg;
  o.alpha_l_irm = lr ? train.alpha_l_irm : 0.0;
  o.alpha_l_grm = lr ? train.alpha_l_grm : 0.0;
  o.single_judge_prompt = train.ablations.single_judge_prompt;
  o.dcpo_gate = !train.ablations.no_dcpo_gate;
  o.adaptive_ref = !train.ablations.no_adaptive_ref;
  return o;
}

RewardSettings effective_rewards(const LossConfig& loss, const TrainConfig& train) {
  const ScirOptions o = effective_options(train);
  RewardSettings r;
  r.beta = loss.beta;
  r.alpha_l_irm = o.alpha_l_irm;
  r.alpha_l_grm = o.alpha_l_grm;
  r.epsilon_tie = loss.epsilon_tie;
  r.single_judge_prompt = o.single_judge_prompt;
  return r;
}

// --- pipeline steps -------------------------------------------------------------

std::vector<std::vector<TokenSeq>> generate_responses(
    const Model& model, std::span<const TaskInstance> prompts, int k,
    double temperature, double top_p, int max_len, std::uint64_t seed,
    int workers) {
  if (k < 2) throw InvalidArgument("generate_responses needs k >= 2");
  return parallel_map(prompts.size(), workers, [&](std::size_t i) {
    std::vector<TokenSeq> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      Rng rng(derive_seed(seed, i * 1024 + static_cast<std::size_t>(j)));
      out.push_back(sample_response(model, prompts[i].prompt, temperature,
                                    top_p, max_len, rng));
    }
    return out;
  });
}

std::vector<PreferencePair> form_pairs(
    std::span<const TaskInstance> prompts,
    const std::vector<std::vector<TokenSeq>>& responses, LabelingMode mode,
    const ResponseScorer& scorer, std::uint64_t seed,
    const std::string& id_prefix) {
  if (responses.size() != prompts.size()) {
    throw InvalidArgument("form_pairs needs one response set per prompt");
  }
  if (mode != LabelingMode::kScir && !scorer) {
    throw InvalidArgument("baseline pair formation needs a scorer");
  }
  std::vector<PreferencePair> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    // Distinct responses in first-seen order.
    std::vector<const TokenSeq*> distinct;
    for (const auto& r : responses[i]) {
      const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                    [&](const TokenSeq* d) { return *d == r; });
      if (!seen) distinct.push_back(&r);
    }
    if (distinct.size() < 2) continue;

    PreferencePair p;
    p.id = id_prefix + std::to_string(i);
    p.prompt = prompts[i].prompt;
    if (mode == LabelingMode::kScir) {
      Rng rng(derive_seed(seed, i));
      const auto n = static_cast<int>(distinct.size());
      const int a = rng.range(0, n - 1);
      int b = rng.range(0, n - 2);
      if (b >= a) ++b;
      p.response_a = *distinct[static_cast<std::size_t>(a)];
      p.response_b = *distinct[static_cast<std::size_t>(b)];
    } else {
      std::size_t best = 0;
      std::size_t worst = 0;
      std::vector<double> scores;
      for (const TokenSeq* r : distinct) scores.push_back(scorer(i, *r));
      for (std::size_t j = 1; j < scores.size(); ++j) {
        if (scores[j] > scores[best]) best = j;
        if (scores[j] < scores[worst]) worst = j;
      }
      if (scores[best] == scores[worst]) continue;
      p.response_a = *distinct[best];
      p.response_b = *distinct[worst];
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

const TaskInstance& instance_for(std::span<const TaskInstance> pool,
                                 const PreferencePair& p) {
  for (const auto& inst : pool) {
    if (inst.prompt == p.prompt) return inst;
  }
  throw InvalidArgument("no task instance for pair '" + p.id + "'");
}

double irm_reward(const Model& policy, const Model& global_ref,
                  const TokenSeq& prompt, const TokenSeq& response,
                  const RewardSettings& s) {
  const double ratio = sequence_logprob(policy, prompt, response) -
                       sequence_logprob(global_ref, prompt, response);
  return implicit_reward_value(ratio, response.size(), s.beta, s.alpha_l_irm);
}

}  // namespace

std::vector<PreferencePair> label_pairs(std::vector<PreferencePair> pairs,
                                        LabelingMode mode,
                                        const LabelContext& ctx) {
  if (mode == LabelingMode::kScir) {
    for (auto& p : pairs) p.agreed_label.reset();
    return pairs;
  }
  if (mode != LabelingMode::kExternalGold &&
      (ctx.policy == nullptr || ctx.global_ref == nullptr)) {
    throw InvalidArgument("label_pairs needs the policy and global reference");
  }
  const PointwiseTemplate point;
  auto labels = parallel_map(pairs.size(), ctx.workers, [&](std::size_t i) {
    const PreferencePair& p = pairs[i];
    switch (mode) {
      case LabelingMode::kExternalGold: {
        const GoldLabel g =
            gold_preference(instance_for(ctx.instances, p), p.response_a,
                            p.response_b);
        if (g == GoldLabel::kTie) return Label::kUndefined;
        return g == GoldLabel::kA ? Label::kA : Label::kB;
      }
      case LabelingMode::kSrlmIrm: {
        const double ra = irm_reward(*ctx.policy, *ctx.global_ref, p.prompt,
                                     p.response_a, ctx.rewards);
        const double rb = irm_reward(*ctx.policy, *ctx.global_ref, p.prompt,
                                     p.response_b, ctx.rewards);
        return hard_label(1.0 / (1.0 + std::exp(-(ra - rb))),
                          ctx.rewards.epsilon_tie);
      }
      case LabelingMode::kSrlmJudgePointwise: {
        const double sa =
            pointwise_judge_score(*ctx.policy, point, p.prompt, p.response_a);
        const double sb =
            pointwise_judge_score(*ctx.policy, point, p.prompt, p.response_b);
        if (sa == sb) return Label::kUndefined;
        return sa > sb ? Label::kA : Label::kB;
      }
      case LabelingMode::kScir:
        break;
    }
    return Label::kUndefined;
  });
  std::vector<PreferencePair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (labels[i] == Label::kUndefined) continue;
    pairs[i].agreed_label = labels[i];
    out.push_back(std::move(pairs[i]));
  }
  return out;
}

json to_json(const StepStats& s) {
  return json{{"epoch", s.epoch},
              {"step", s.step},
              {"lr", s.lr},
              {"loss", s.loss},
              {"grad_norm", s.grad_norm},
              {"batch", s.batch},
              {"gated", s.gated},
              {"global_refs", s.global_refs},
              {"mean_consistency", s.mean_consistency}};
}

namespace {

void dump_state(const fs::path& path, const Model& model,
                std::span<const PreferencePair> batch, const StepStats& stats,
                const std::string& what) {
  if (path.empty()) return;
  double max_abs = 0.0;
  std::size_t non_finite = 0;
  for (double v : model.params.values()) {
    if (!std::isfinite(v)) {
      ++non_finite;
    } else {
      max_abs = std::max(max_abs, std::abs(v));
    }
  }
  json pairs = json::array();
  for (const auto& p : batch) pairs.push_back(pair_to_json(p));
  json dump{{"error", what},
            {"step", to_json(stats)},
            {"param_max_abs", max_abs},
            {"param_non_finite", non_finite},
            {"batch", pairs}};
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_json_file(path, dump);
}

}  // namespace

TrainingResult run_training_epochs(const Model& start, const ReferenceSet& refs,
                                   std::span<const PreferencePair> pairs,
                                   LabelingMode mode, const LossConfig& loss,
                                   const TrainConfig& config,
                                   std::uint64_t seed,
                                   const fs::path& dump_path) {
  if (pairs.empty()) throw InvalidArgument("run_training_epochs needs pairs");
  config.validate();
  const LossConfig lc = effective_loss(loss, config);
  lc.validate();
  const ScirOptions options = effective_options(config);

  std::vector<RefScores> ref_scores;
  ref_scores.reserve(pairs.size());
  for (const auto& p : pairs) ref_scores.push_back(refs.score(p));

  TrainingResult result{start, {}};
  Model& model = result.model;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (pairs.size() + bs - 1) / bs;
  const std::size_t total =
      steps_per_epoch * static_cast<std::size_t>(config.epochs_per_iteration);
  AdamW opt(model.params.size(), config.adamw);

  std::vector<std::size_t> order(pairs.size());
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs_per_iteration; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    for (std::size_t begin = 0; begin < order.size(); begin += bs, ++step) {
      const std::size_t end = std::min(order.size(), begin + bs);
      std::vector<PreferencePair> batch;
      std::vector<RefScores> batch_refs;
      for (std::size_t j = begin; j < end; ++j) {
        batch.push_back(pairs[order[j]]);
        batch_refs.push_back(ref_scores[order[j]]);
      }
      StepStats stats;
      stats.epoch = epoch;
      stats.step = step;
      stats.batch = batch.size();
      stats.lr = cosine_lr(config.learning_rate, step, total);
      try {
        Tape tape;
        LmGraph g(tape, model, true);
        Var root;
        if (mode == LabelingMode::kScir) {
          BatchLoss bl = scir_batch_loss(g, batch, batch_refs, lc, options);
          root = bl.loss;
          stats.gated = bl.gate_count();
          double c = 0.0;
          for (const auto& t : bl.pairs) {
            c += t.consistency;
            if (t.gate && t.ref == RefChoice::kGlobal) ++stats.global_refs;
          }
          stats.mean_consistency = c / static_cast<double>(bl.pairs.size());
        } else {
          root = dpo_batch_loss(g, batch, batch_refs, lc.beta);
          stats.gated = batch.size();
        }
        stats.loss = root.value();
        if (!std::isfinite(stats.loss)) throw NumericError("non-finite loss");
        std::vector<double> gradient(model.params.size(), 0.0);
        if (root.requires_grad()) {
          tape.backward(root);
          auto gr = tape.grad(g.params());
          std::copy(gr.begin(), gr.end(), gradient.begin());
        }
        stats.grad_norm = opt.step(model.params, gradient, stats.lr);
      } catch (const NumericError& e) {
        dump_state(dump_path, model, batch, stats, e.what());
        throw NumericError(std::string(e.what()) + " at epoch " +
                           std::to_string(epoch) + " step " +
                           std::to_string(step));
      }
      result.steps.push_back(stats);
    }
  }
  return result;
}

// --- orchestration --------------------------------------------------------------

json pair_to_json(const PreferencePair& p) {
  json j{{"id", p.id},
         {"prompt", p.prompt},
         {"response_a", p.response_a},
         {"response_b", p.response_b},
         {"gold_label", p.gold_label ? json(to_string(*p.gold_label)) : json(nullptr)},
         {"label", p.agreed_label ? json(to_string(*p.agreed_label)) : json(nullptr)}};
  return j;
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  try {
    p.id = j.at("id").get<std::string>();
    p.prompt = j.at("prompt").get<TokenSeq>();
    p.response_a = j.at("response_a").get<TokenSeq>();
    p.response_b = j.at("response_b").get<TokenSeq>();
    if (j.contains("gold_label") && !j.at("gold_label").is_null()) {
      p.gold_label = gold_label_from_string(j.at("gold_label").get<std::string>());
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      p.agreed_label = label_from_string(j.at("label").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed preference pair: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("malformed preference pair: ") + e.what());
  }
  return p;
}

std::vector<PreferencePair> probe_pairs(const Model& model,
                                        std::span<const TaskInstance> pool,
                                        const TrainConfig& config,
                                        std::uint64_t seed, int workers,
                                        const std::string& id_prefix) {
  auto responses = generate_responses(
      model, pool, config.k_responses, config.temperature, config.top_p,
      config.max_response_len, derive_seed(seed, hash_label("generate")),
      workers);
  return form_pairs(pool, responses, LabelingMode::kScir, {},
                    derive_seed(seed, hash_label("pairs")), id_prefix);
}

namespace {

std::uint64_t iteration_seed(std::uint64_t master, int t) {
  return derive_seed(master, hash_label("iteration/" + std::to_string(t)));
}

void write_pairs(const fs::path& path, std::span<const PreferencePair> pairs) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(pair_to_json(p));
  write_jsonl(path, rows);
}

void write_verdicts(const fs::path& path, std::span<const PreferencePair> pairs,
                    std::span<const PreferenceVerdict> verdicts) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    rows.push_back(verdict_to_json(pairs[i].id, verdicts[i]));
  }
  write_jsonl(path, rows);
}

// Metrics of `model` on fresh pairs, optionally on the pairs it was last
// trained on, and on the gold pairs.
std::vector<MetricsRecord> measure(const Model& model, const Model& global_ref,
                                   std::span<const PreferencePair> fresh,
                                   const std::vector<PreferencePair>* trained,
                                   std::span<const PreferencePair> gold,
                                   const RewardSettings& rewards, int iteration,
                                   const RunSettings& s,
                                   std::vector<PreferenceVerdict>* fresh_out) {
  std::vector<MetricsRecord> out;
  auto fresh_v = compute_verdicts(model, global_ref, fresh, rewards, s.workers);
  out.push_back(rate_record(s.run_id, iteration, "new_D_t", "consistency_rate",
                            consistency_rate(fresh_v)));
  out.push_back(rate_record(s.run_id, iteration, "new_D_t", "inconsistency_rate",
                            inconsistency_rate(fresh_v)));
  if (trained != nullptr && !trained->empty()) {
    auto tv = compute_verdicts(model, global_ref, *trained, rewards, s.workers);
    out.push_back(rate_record(s.run_id, iteration, "trained_D_prev",
                              "consistency_rate", consistency_rate(tv)));
    out.push_back(rate_record(s.run_id, iteration, "trained_D_prev",
                              "inconsistency_rate", inconsistency_rate(tv)));
  }
  if (!gold.empty()) {
    auto gv = compute_verdicts(model, global_ref, gold, rewards, s.workers);
    for (auto m : {ScorerMode::kIrm, ScorerMode::kGrm, ScorerMode::kConsistent}) {
      out.push_back(rate_record(s.run_id, iteration, "heldout_gold",
                                "reward_accuracy_" + std::string(to_string(m)),
                                reward_accuracy(gv, gold, m)));
    }
  }
  if (fresh_out != nullptr) *fresh_out = std::move(fresh_v);
  return out;
}

}  // namespace

std::vector<IterationSummary> run_iterations(const RunInputs& in,
                                             const RunSettings& s) {
  const TrainConfig& tc = s.train;
  tc.validate();
  s.loss.validate();
  if (in.pools.size() < static_cast<std::size_t>(tc.iterations) + 1) {
    throw InvalidArgument("run_iterations needs iterations + 1 prompt pools");
  }
  if (model_layout(in.m0.config) != model_layout(in.global_ref.config)) {
    throw InvalidArgument("M_0 and the global reference differ in shape");
  }
  auto log = [&](const std::string& m) {
    if (s.log) s.log(m);
  };
  const fs::path ckpt_dir = s.run_dir / "checkpoints";
  const fs::path data_dir = s.run_dir / "data";
  const fs::path metrics_dir = s.run_dir / "metrics";
  const fs::path logs_dir = s.run_dir / "logs";
  for (const auto& d : {ckpt_dir, data_dir, metrics_dir, logs_dir}) {
    fs::create_directories(d);
  }
  const RewardSettings rewards = effective_rewards(s.loss, tc);
  const grad::ParamVector global_params = in.global_ref.params;

  std::vector<IterationSummary> summaries;
  Model current = in.m0;
  std::vector<PreferencePair> trained_prev;

  for (int t = 0; t < tc.iterations; ++t) {
    const auto clock0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = iteration_seed(tc.master_seed, t);
    const auto& pool_all = in.pools[static_cast<std::size_t>(t)];
    const std::size_t n = std::min(pool_all.size(), tc.prompts_per_iteration);
    std::span<const TaskInstance> pool(pool_all.data(), n);

    auto responses = generate_responses(
        current, pool, tc.k_responses, tc.temperature, tc.top_p,
        tc.max_response_len, derive_seed(seed, hash_label("generate")),
        s.workers);
    const std::string prefix = "t" + std::to_string(t) + "_";
    // The same random-pair rule for every mode; it is D_t itself under SCIR.
    auto probe = form_pairs(pool, responses, LabelingMode::kScir, {},
                            derive_seed(seed, hash_label("pairs")), prefix);

    std::vector<PreferencePair> d_t;
    if (s.mode == LabelingMode::kScir) {
      d_t = probe;
    } else {
      ResponseScorer scorer;
      const PointwiseTemplate point;
      switch (s.mode) {
        case LabelingMode::kExternalGold:
          scorer = [&](std::size_t i, const TokenSeq& r) {
            return gold_score(pool[i], r);
          };
          break;
        case LabelingMode::kSrlmIrm:
          scorer = [&](std::size_t i, const TokenSeq& r) {
            return irm_reward(current, in.global_ref, pool[i].prompt, r, rewards);
          };
          break;
        default:
          scorer = [&](std::size_t i, const TokenSeq& r) {
            return pointwise_judge_score(current, point, pool[i].prompt, r);
          };
          break;
      }
      auto pairs = form_pairs(pool, responses, s.mode, scorer,
                              derive_seed(seed, hash_label("pairs")), prefix);
      LabelContext ctx{&current, &in.global_ref, pool, rewards, s.workers};
      d_t = label_pairs(std::move(pairs), s.mode, ctx);
    }
    for (auto& p : d_t) {
      const GoldLabel g = gold_preference(instance_for(pool, p), p.response_a,
                                          p.response_b);
      p.gold_label = g;
    }
    write_pairs(data_dir / ("D_" + std::to_string(t) + ".jsonl"), d_t);

    std::vector<PreferenceVerdict> probe_v;
    auto records = measure(current, in.global_ref, probe,
                           t > 0 ? &trained_prev : nullptr, in.gold_pairs,
                           rewards, t, s, &probe_v);
    write_verdicts(data_dir / ("verdicts_" + std::to_string(t) + ".jsonl"),
                   probe, probe_v);

    if (d_t.empty()) {
      throw NumericError("iteration " + std::to_string(t) +
                         " produced no trainable pairs");
    }
    ReferenceSet refs{current, in.global_ref};
    TrainingResult tr = run_training_epochs(
        current, refs, d_t, s.mode, s.loss, tc,
        derive_seed(seed, hash_label("train")),
        logs_dir / ("failure_" + std::to_string(t) + ".json"));

    double gated = 0.0;
    double seen = 0.0;
    double loss_sum = 0.0;
    std::vector<json> step_rows;
    for (const auto& st : tr.steps) {
      gated += static_cast<double>(st.gated);
      seen += static_cast<double>(st.batch);
      loss_sum += st.loss;
      step_rows.push_back(to_json(st));
    }
    write_jsonl(logs_dir / ("train_" + std::to_string(t) + ".jsonl"), step_rows);
    records.push_back(MetricsRecord{s.run_id, t, "train_D_t", "gate_fraction",
                                    gated / seen, d_t.size(), probe.size()});
    records.push_back(MetricsRecord{
        s.run_id, t, "train_D_t", "mean_loss",
        loss_sum / static_cast<double>(tr.steps.size()), tr.steps.size(),
        tr.steps.size()});
    emit_metrics(metrics_dir / ("iteration_" + std::to_string(t) + ".jsonl"),
                 records);

    if (!(in.global_ref.params == global_params)) {
      throw Error(ErrorKind::kCheckFailed, "global reference was modified");
    }
    current = std::move(tr.model);
    const std::string tag = "M_" + std::to_string(t + 1);
    json manifest = save_checkpoint(
        ckpt_dir, tag, current,
        json{{"parent", "M_" + std::to_string(t)},
             {"mode", to_string(s.mode)},
             {"pairs", d_t.size()}});
    trained_prev = std::move(d_t);

    IterationSummary sum;
    sum.iteration = t;
    sum.pairs = trained_prev.size();
    for (const auto& r : records) {
      if (r.dataset == "new_D_t" && r.metric == "consistency_rate") {
        sum.consistency_new = r.value;
      }
    }
    sum.checkpoint_sha = manifest.at("sha256").get<std::string>();
    summaries.push_back(sum);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - clock0)
                            .count();
    log("iteration " + std::to_string(t) + ": pairs=" +
        std::to_string(sum.pairs) + " consistency_new=" +
        (sum.consistency_new ? std::to_string(*sum.consistency_new) : "null") +
        " seconds=" + std::to_string(secs));
  }

  // Final checkpoint on a fresh pool.
  const int t_final = tc.iterations;
  const std::uint64_t seed = iteration_seed(tc.master_seed, t_final);
  const auto& pool_all = in.pools[static_cast<std::size_t>(t_final)];
  const std::size_t n = std::min(pool_all.size(), tc.prompts_per_iteration);
  std::span<const TaskInstance> pool(pool_all.data(), n);
  auto probe = probe_pairs(current, pool, tc, seed, s.workers,
                           "t" + std::to_string(t_final) + "_");
  std::vector<PreferenceVerdict> probe_v;
  auto records = measure(current, in.global_ref, probe,
                         t_final > 0 ? &trained_prev : nullptr, in.gold_pairs,
                         rewards, t_final, s, &probe_v);
  write_verdicts(data_dir / ("verdicts_" + std::to_string(t_final) + ".jsonl"),
                 probe, probe_v);
  if (!in.heldout.empty()) {
    WinRateReport w = winrate_report(current, in.m0, in.heldout,
                                     tc.max_response_len, s.workers);
    const std::size_t decided = w.wins + w.losses;
    const std::size_t total = decided + w.ties;
    records.push_back(MetricsRecord{s.run_id, t_final, "heldout_prompts",
                                    "win_rate_vs_M_0", w.win_rate, decided, total});
    records.push_back(MetricsRecord{
        s.run_id, t_final, "heldout_prompts", "tie_fraction_vs_M_0",
        static_cast<double>(w.ties) / static_cast<double>(total), total, total});
    records.push_back(MetricsRecord{s.run_id, t_final, "heldout_prompts",
                                    "avg_len_final", w.avg_len_a, total, total});
    records.push_back(MetricsRecord{s.run_id, t_final, "heldout_prompts",
                                    "avg_len_M_0", w.avg_len_b, total, total});
  }
  emit_metrics(metrics_dir / "final.jsonl", records);
  return summaries;
}

}  // namespace scir
