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

#include "scir/rewards.hpp"

#include "scir/error.hpp"

namespace scir {

using grad::Tape;
using grad::Var;
using nlohmann::json;

Label hard_label(double p, double epsilon_tie) {
  if (p > 0.5 + epsilon_tie) return Label::kA;
  if (p < 0.5 - epsilon_tie) return Label::kB;
  return Label::kUndefined;
}

Label hard_label(Tape& tape, double p, double epsilon_tie) {
  if (tape.indicator(p > 0.5 + epsilon_tie)) return Label::kA;
  if (tape.indicator(p < 0.5 - epsilon_tie)) return Label::kB;
  return Label::kUndefined;
}

double implicit_reward_value(double log_ratio, std::size_t length, double beta,
                             double alpha_l) {
  return beta * log_ratio - alpha_l * static_cast<double>(length);
}

Var implicit_reward(LmGraph& policy, double ref_logprob, const TokenSeq& prompt,
                    const TokenSeq& response, double beta, double alpha_l) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
  if (alpha_l < 0.0) throw InvalidArgument("alpha_l must be >= 0");
  Var lp = policy.sequence_logprob(prompt, response);
  return grad::add_scalar(
      grad::scale(lp, beta),
      -beta * ref_logprob - alpha_l * static_cast<double>(response.size()));
}

Var irm_from_logprobs(Var policy_lp_a, Var policy_lp_b, double ref_lp_a,
                      double ref_lp_b, std::size_t len_a, std::size_t len_b,
                      double beta, double alpha_l) {
  // r_a - r_b = beta * ((lp_a - lp_b) - (ref_a - ref_b)) - alpha_l * (|a| - |b|)
  const double offset =
      -beta * (ref_lp_a - ref_lp_b) -
      alpha_l * (static_cast<double>(len_a) - static_cast<double>(len_b));
  Var gap = grad::add_scalar(
      grad::scale(grad::sub(policy_lp_a, policy_lp_b), beta), offset);
  return grad::sigmoid(gap);
}

Var irm_preference(LmGraph& policy, const PreferencePair& pair,
                   double ref_lp_a, double ref_lp_b, double beta,
                   double alpha_l) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
  if (alpha_l < 0.0) throw InvalidArgument("alpha_l must be >= 0");
  Var a = policy.sequence_logprob(pair.prompt, pair.response_a);
  Var b = policy.sequence_logprob(pair.prompt, pair.response_b);
  return irm_from_logprobs(a, b, ref_lp_a, ref_lp_b, pair.response_a.size(),
                           pair.response_b.size(), beta, alpha_l);
}

Var grm_preference_single(LmGraph& policy, const JudgePromptTemplate& tpl,
                          const PreferencePair& pair, Order order,
                          double alpha_l) {
  const bool ab = order == Order::kAB;
  const TokenSeq& first = ab ? pair.response_a : pair.response_b;
  const TokenSeq& second = ab ? pair.response_b : pair.response_a;
  const TokenSeq prompt = tpl.fill(pair.prompt, first, second);
  Var p_first = policy.verdict_probability(
      prompt, tpl.verdict_first, tpl.verdict_second,
      alpha_l * static_cast<double>(first.size()),
      alpha_l * static_cast<double>(second.size()));
  if (ab) return p_first;
  return grad::add_scalar(grad::neg(p_first), 1.0);
}

bool position_consistent(const std::vector<double>& variants,
                         double epsilon_tie) {
  if (variants.empty()) return false;
  const Label first = hard_label(variants.front(), epsilon_tie);
  if (first == Label::kUndefined) return false;
  for (double v : variants) {
    if (hard_label(v, epsilon_tie) != first) return false;
  }
  return true;
}

GrmPrediction grm_preference(LmGraph& policy, const PreferencePair& pair,
                             double alpha_l, double epsilon_tie,
                             bool single_judge_prompt) {
  GrmPrediction out;
  std::vector<Var> terms;
  for (const auto& variant : kJudgeVariants) {
    Var p = grm_preference_single(policy, judge_template(variant.id), pair,
                                  variant.order, alpha_l);
    terms.push_back(p);
    out.variants.push_back(p.value());
    if (single_judge_prompt) break;
  }
  out.p = terms.size() == 1
              ? terms.front()
              : grad::scale(grad::sum_all(terms),
                            1.0 / static_cast<double>(terms.size()));
  // Each variant label goes through the indicator log.
  Tape& tape = policy.tape();
  bool consistent = true;
  Label first = Label::kUndefined;
  for (std::size_t i = 0; i < out.variants.size(); ++i) {
    const Label l = hard_label(tape, out.variants[i], epsilon_tie);
    if (i == 0) first = l;
    if (l == Label::kUndefined || l != first) consistent = false;
  }
  out.position_consistent = consistent;
  return out;
}

RefChoice select_reference(const RefScores& s,
                           std::optional<Label> agreed_label) {
  if (!agreed_label || *agreed_label == Label::kUndefined) {
    throw InvalidArgument("select_reference requires an agreed label");
  }
  const double local = reference_gap(s, *agreed_label, RefChoice::kLocal);
  const double global = reference_gap(s, *agreed_label, RefChoice::kGlobal);
  return global > local ? RefChoice::kGlobal : RefChoice::kLocal;
}

double reference_gap(const RefScores& s, Label chosen, RefChoice which) {
  const double a = which == RefChoice::kLocal ? s.local_a : s.global_a;
  const double b = which == RefChoice::kLocal ? s.local_b : s.global_b;
  return chosen == Label::kA ? a - b : b - a;
}

RefScores ReferenceSet::score(const PreferencePair& pair) const {
  RefScores s;
  s.global_a = sequence_logprob(global, pair.prompt, pair.response_a);
  s.global_b = sequence_logprob(global, pair.prompt, pair.response_b);
  s.local_a = sequence_logprob(local, pair.prompt, pair.response_a);
  s.local_b = sequence_logprob(local, pair.prompt, pair.response_b);
  return s;
}

PreferenceVerdict compute_verdict(const Model& policy,
                                  const PreferencePair& pair,
                                  const RefScores& refs,
                                  const RewardSettings& settings) {
  Tape tape;
  LmGraph g(tape, policy, false);
  PreferenceVerdict v;
  v.p_irm = irm_preference(g, pair, refs.global_a, refs.global_b,
                           settings.beta, settings.alpha_l_irm)
                .value();
  GrmPrediction grm = grm_preference(g, pair, settings.alpha_l_grm,
                                     settings.epsilon_tie,
                                     settings.single_judge_prompt);
  v.p_grm = grm.p.value();
  v.p_grm_variants = std::move(grm.variants);
  v.grm_position_consistent = grm.position_consistent;
  v.label_irm = hard_label(v.p_irm, settings.epsilon_tie);
  v.label_grm = hard_label(v.p_grm, settings.epsilon_tie);
  return v;
}

json verdict_to_json(const std::string& pair_id, const PreferenceVerdict& v) {
  return json{{"pair_id", pair_id},
              {"p_irm", v.p_irm},
              {"p_grm", v.p_grm},
              {"variants", v.p_grm_variants},
              {"label_irm", to_string(v.label_irm)},
              {"label_grm", to_string(v.label_grm)},
              {"position_consistent", v.grm_position_consistent}};
}

PreferenceVerdict verdict_from_json(const json& j) {
  PreferenceVerdict v;
  try {
    v.p_irm = j.at("p_irm").get<double>();
    v.p_grm = j.at("p_grm").get<double>();
    v.p_grm_variants = j.at("variants").get<std::vector<double>>();
    v.label_irm = label_from_string(j.at("label_irm").get<std::string>());
    v.label_grm = label_from_string(j.at("label_grm").get<std::string>());
    v.grm_position_consistent = j.at("position_consistent").get<bool>();
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed verdict record: ") + e.what());
  }
  return v;
}

}  // namespace scir
