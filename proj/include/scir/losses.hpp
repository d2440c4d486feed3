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

#ifndef SCIR_LOSSES_HPP_
#define SCIR_LOSSES_HPP_

// Training objectives.
//
//   DPO:          softplus(-beta * [(lp_w - ref_w) - (lp_l - ref_l)])
//   consistency:  1[conf(P)] (KL(Q || sg P) + H(Q)) + 1[conf(Q)] (KL(P || sg Q) + H(P))
//   SCIR batch:   mean_i gate_i * DPO_i(adaptive ref) + alpha * consistency_i
//
// The gate is open when the IRM and GRM hard labels agree, are defined, and the
// GRM is position-consistent. Gates, confidence masks and labels go through the
// tape's indicator log and never carry gradient.

#include <cstddef>
#include <span>
#include <vector>

#include "scir/gradcore.hpp"
#include "scir/judge_templates.hpp"
#include "scir/lm.hpp"
#include "scir/preference.hpp"
#include "scir/rewards.hpp"

namespace scir {

inline constexpr double kProbClamp = 1e-7;

struct LossConfig {
  double beta = 0.1;
  double tau = 0.7;
  double alpha = 1.0;
  double epsilon_tie = 1e-6;
  // Compare P itself against tau instead of max(P, 1 - P).
  bool literal_confidence = false;

  void validate() const;
};

// softplus(-beta * (logratio_w - logratio_l))
double dpo_loss_value(double logratio_w, double logratio_l, double beta);

grad::Var dpo_loss(grad::Var policy_lp_w, grad::Var policy_lp_l, double ref_w,
                   double ref_l, double beta);
// `chosen` selects the winner; ref_a / ref_b are reference log-probabilities.
grad::Var dpo_loss(LmGraph& policy, const PreferencePair& pair, Label chosen,
                   double ref_a, double ref_b, double beta);

// Arguments are clamped to [kProbClamp, 1 - kProbClamp].
double bernoulli_kl(double q, double p);
double bernoulli_entropy(double q);
grad::Var bernoulli_kl(grad::Var q, grad::Var p);
grad::Var bernoulli_entropy(grad::Var q);

bool is_confident(double p, double tau, bool literal);

grad::Var consistency_loss(grad::Var p, grad::Var q, double tau,
                           bool literal = false);
double consistency_loss_value(double p, double q, double tau,
                              bool literal = false);

// Objective switches; the defaults give full SCIR.
struct ScirOptions {
  double alpha_l_irm = 0.0;
  double alpha_l_grm = 0.02;
  bool single_judge_prompt = false;
  // Off: every pair trains, labelled by hard_label((P + Q) / 2).
  bool dcpo_gate = true;
  // Off: the local reference is used for every DPO term.
  bool adaptive_ref = true;
};

struct PairTerms {
  PreferenceVerdict verdict;
  bool gate = false;
  Label label = Label::kUndefined;  // label trained on when the gate is open
  RefChoice ref = RefChoice::kLocal;
  double dpo = 0.0;  // 0 when the gate is closed
  double consistency = 0.0;
};

struct BatchLoss {
  grad::Var loss;
  std::vector<PairTerms> pairs;

  std::size_t gate_count() const;
};

// Verdicts are recomputed from `policy` as it is bound on this tape.
// `refs[i]` holds the frozen reference scores of `batch[i]`.
BatchLoss scir_batch_loss(LmGraph& policy, std::span<const PreferencePair> batch,
                          std::span<const RefScores> refs,
                          const LossConfig& config, const ScirOptions& options);

grad::ScalarExpr scir_batch_expr(const ModelConfig& model,
                                 std::vector<PreferencePair> batch,
                                 std::vector<RefScores> refs, LossConfig config,
                                 ScirOptions options);

// Mean DPO loss over pairs carrying `agreed_label`, against the local
// reference. Used by the baseline labelling modes.
grad::Var dpo_batch_loss(LmGraph& policy, std::span<const PreferencePair> batch,
                         std::span<const RefScores> refs, double beta);

// Expected score sum_k k * softmax(o_{s_k}) over the five score tokens.
double pointwise_judge_score(const Model& policy, const PointwiseTemplate& tpl,
                             const TokenSeq& prompt, const TokenSeq& response);

}  // namespace scir

#endif  // SCIR_LOSSES_HPP_
