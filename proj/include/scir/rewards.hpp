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

#ifndef SCIR_REWARDS_HPP_
#define SCIR_REWARDS_HPP_

// The two internal reward models of one policy.
//
//   IRM: sigma(r(y_a) - r(y_b)),  r(y) = beta * (log pi(y|x) - log ref(y|x)) - a_l |y|
//   GRM: mean over {T1,T2} x {AB,BA} of the canonicalized probability that the
//        judge readout prefers response_a, with verdict logits length-adjusted.

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "scir/gradcore.hpp"
#include "scir/judge_templates.hpp"
#include "scir/lm.hpp"
#include "scir/preference.hpp"

namespace scir {

struct RewardSettings {
  double beta = 0.1;
  double alpha_l_irm = 0.0;
  double alpha_l_grm = 0.02;
  double epsilon_tie = 1e-6;
  bool single_judge_prompt = false;
};

// A for p > 0.5 + eps, B for p < 0.5 - eps, undefined otherwise.
Label hard_label(double p, double epsilon_tie);
// Same rule, with both comparisons routed through the tape's indicator log.
Label hard_label(grad::Tape& tape, double p, double epsilon_tie);

// beta * log_ratio - alpha_l * length
double implicit_reward_value(double log_ratio, std::size_t length, double beta,
                             double alpha_l);

grad::Var implicit_reward(LmGraph& policy, double ref_logprob,
                          const TokenSeq& prompt, const TokenSeq& response,
                          double beta, double alpha_l);

// IRM probability from already-computed policy log-probabilities.
grad::Var irm_from_logprobs(grad::Var policy_lp_a, grad::Var policy_lp_b,
                            double ref_lp_a, double ref_lp_b,
                            std::size_t len_a, std::size_t len_b, double beta,
                            double alpha_l);

grad::Var irm_preference(LmGraph& policy, const PreferencePair& pair,
                         double ref_lp_a, double ref_lp_b, double beta,
                         double alpha_l);

// Probability that response_a is preferred under one template and order.
grad::Var grm_preference_single(LmGraph& policy,
                                const JudgePromptTemplate& tpl,
                                const PreferencePair& pair, Order order,
                                double alpha_l);

struct GrmPrediction {
  grad::Var p;
  std::vector<double> variants;  // canonical variant order, or just T1xAB
  bool position_consistent = false;
};

GrmPrediction grm_preference(LmGraph& policy, const PreferencePair& pair,
                             double alpha_l, double epsilon_tie,
                             bool single_judge_prompt = false);

// True iff every variant has the same defined hard label.
bool position_consistent(const std::vector<double>& variants,
                         double epsilon_tie);

// Frozen reference log-probabilities of both responses of a pair.
struct RefScores {
  double global_a = 0.0;
  double global_b = 0.0;
  double local_a = 0.0;
  double local_b = 0.0;
};

enum class RefChoice { kLocal, kGlobal };

// Picks the reference whose chosen-over-rejected log-ratio gap is largest;
// ties go to the local reference.
RefChoice select_reference(const RefScores& scores,
                           std::optional<Label> agreed_label);
double reference_gap(const RefScores& scores, Label chosen, RefChoice which);

struct ReferenceSet {
  Model local;   // snapshot of the policy at the start of the iteration
  Model global;  // the model supervised fine-tuning started from

  RefScores score(const PreferencePair& pair) const;
};

struct PreferenceVerdict {
  double p_irm = 0.5;
  double p_grm = 0.5;
  std::vector<double> p_grm_variants;
  Label label_irm = Label::kUndefined;
  Label label_grm = Label::kUndefined;
  bool grm_position_consistent = false;
};

PreferenceVerdict compute_verdict(const Model& policy,
                                  const PreferencePair& pair,
                                  const RefScores& refs,
                                  const RewardSettings& settings);

nlohmann::json verdict_to_json(const std::string& pair_id,
                               const PreferenceVerdict& v);
PreferenceVerdict verdict_from_json(const nlohmann::json& j);

}  // namespace scir

#endif  // SCIR_REWARDS_HPP_
