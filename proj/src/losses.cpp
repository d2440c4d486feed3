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

#include "scir/losses.hpp"

#include <algorithm>
#include <cmath>

#include "scir/error.hpp"

namespace scir {

using grad::Tape;
using grad::Var;

namespace {

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

Var clamp_prob(Var p) { return grad::clamp(p, kProbClamp, 1.0 - kProbClamp); }

Var one_minus(Var p) { return grad::add_scalar(grad::neg(p), 1.0); }

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("loss.beta must be > 0");
  if (!(tau >= 0.5 && tau < 1.0)) throw ConfigError("loss.tau must be in [0.5, 1)");
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(epsilon_tie >= 0.0 && epsilon_tie < 0.5)) {
    throw ConfigError("loss.epsilon_tie must be in [0, 0.5)");
  }
}

double dpo_loss_value(double logratio_w, double logratio_l, double beta) {
  return softplus(-beta * (logratio_w - logratio_l));
}

Var dpo_loss(Var policy_lp_w, Var policy_lp_l, double ref_w, double ref_l,
             double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
  // -beta * ((lp_w - lp_l) - (ref_w - ref_l))
  Var margin = grad::add_scalar(grad::sub(policy_lp_w, policy_lp_l),
                                -(ref_w - ref_l));
  return grad::softplus(grad::scale(margin, -beta));
}

Var dpo_loss(LmGraph& policy, const PreferencePair& pair, Label chosen,
             double ref_a, double ref_b, double beta) {
  if (chosen == Label::kUndefined) {
    throw InvalidArgument("dpo_loss needs a defined chosen response");
  }
  Var a = policy.sequence_logprob(pair.prompt, pair.response_a);
  Var b = policy.sequence_logprob(pair.prompt, pair.response_b);
  return chosen == Label::kA ? dpo_loss(a, b, ref_a, ref_b, beta)
                             : dpo_loss(b, a, ref_b, ref_a, beta);
}

double bernoulli_kl(double q, double p) {
  q = clamp_prob(q);
  p = clamp_prob(p);
  return q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
}

double bernoulli_entropy(double q) {
  q = clamp_prob(q);
  return -q * std::log(q) - (1.0 - q) * std::log(1.0 - q);
}

Var bernoulli_kl(Var q, Var p) {
  q = clamp_prob(q);
  p = clamp_prob(p);
  Var q1 = one_minus(q);
  Var p1 = one_minus(p);
  Var first = grad::mul(q, grad::sub(grad::log(q), grad::log(p)));
  Var second = grad::mul(q1, grad::sub(grad::log(q1), grad::log(p1)));
  return grad::add(first, second);
}

Var bernoulli_entropy(Var q) {
  q = clamp_prob(q);
  Var q1 = one_minus(q);
  return grad::neg(grad::add(grad::mul(q, grad::log(q)),
                             grad::mul(q1, grad::log(q1))));
}

bool is_confident(double p, double tau, bool literal) {
  return literal ? p > tau : std::max(p, 1.0 - p) > tau;
}

Var consistency_loss(Var p, Var q, double tau, bool literal) {
  Tape& tape = p.tape();
  const bool p_conf = tape.indicator(is_confident(p.value(), tau, literal));
  const bool q_conf = tape.indicator(is_confident(q.value(), tau, literal));
  std::vector<Var> terms;
  if (p_conf) {
    terms.push_back(grad::add(bernoulli_kl(q, grad::stop_gradient(p)),
                              bernoulli_entropy(q)));
  }
  if (q_conf) {
    terms.push_back(grad::add(bernoulli_kl(p, grad::stop_gradient(q)),
                              bernoulli_entropy(p)));
  }
  if (terms.empty()) return tape.scalar(0.0);
  if (terms.size() == 1) return terms.front();
  return grad::add(terms[0], terms[1]);
}

double consistency_loss_value(double p, double q, double tau, bool literal) {
  double total = 0.0;
  if (is_confident(p, tau, literal)) {
    total += bernoulli_kl(q, p) + bernoulli_entropy(q);
  }
  if (is_confident(q, tau, literal)) {
    total += bernoulli_kl(p, q) + bernoulli_entropy(p);
  }
  return total;
}

std::size_t BatchLoss::gate_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(),
                    [](const PairTerms& t) { return t.gate; }));
}

BatchLoss scir_batch_loss(LmGraph& policy, std::span<const PreferencePair> batch,
                          std::span<const RefScores> refs,
                          const LossConfig& config, const ScirOptions& options) {
  if (batch.empty()) throw InvalidArgument("scir_batch_loss on an empty batch");
  if (refs.size() != batch.size()) {
    throw InvalidArgument("scir_batch_loss needs one RefScores per pair");
  }
  Tape& tape = policy.tape();
  const double eps = config.epsilon_tie;
  BatchLoss out;
  out.pairs.reserve(batch.size());
  std::vector<Var> terms;
  terms.reserve(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PreferencePair& pair = batch[i];
    const RefScores& ref = refs[i];
    PairTerms info;

    Var lp_a = policy.sequence_logprob(pair.prompt, pair.response_a);
    Var lp_b = policy.sequence_logprob(pair.prompt, pair.response_b);
    Var p_irm = irm_from_logprobs(lp_a, lp_b, ref.global_a, ref.global_b,
                                  pair.response_a.size(),
                                  pair.response_b.size(), config.beta,
                                  options.alpha_l_irm);
    GrmPrediction grm = grm_preference(policy, pair, options.alpha_l_grm, eps,
                                       options.single_judge_prompt);

    PreferenceVerdict& v = info.verdict;
    v.p_irm = p_irm.value();
    v.p_grm = grm.p.value();
    v.p_grm_variants = grm.variants;
    v.grm_position_consistent = grm.position_consistent;
    v.label_irm = hard_label(tape, v.p_irm, eps);
    v.label_grm = hard_label(tape, v.p_grm, eps);

    if (options.dcpo_gate) {
      info.gate = tape.indicator(v.label_irm != Label::kUndefined &&
                                 v.label_irm == v.label_grm &&
                                 v.grm_position_consistent);
      info.label = info.gate ? v.label_irm : Label::kUndefined;
    } else {
      info.label = hard_label(tape, 0.5 * (v.p_irm + v.p_grm), eps);
      info.gate = info.label != Label::kUndefined;
    }

    std::vector<Var> parts;
    if (info.gate) {
      info.ref = options.adaptive_ref ? select_reference(ref, info.label)
                                      : RefChoice::kLocal;
      const bool local = info.ref == RefChoice::kLocal;
      const double ref_a = local ? ref.local_a : ref.global_a;
      const double ref_b = local ? ref.local_b : ref.global_b;
      Var d = info.label == Label::kA
                  ? dpo_loss(lp_a, lp_b, ref_a, ref_b, config.beta)
                  : dpo_loss(lp_b, lp_a, ref_b, ref_a, config.beta);
      info.dpo = d.value();
      parts.push_back(d);
    }
    if (config.alpha > 0.0) {
      Var c = consistency_loss(p_irm, grm.p, config.tau,
                               config.literal_confidence);
      info.consistency = c.value();
      parts.push_back(grad::scale(c, config.alpha));
    }
    if (parts.size() == 2) {
      terms.push_back(grad::add(parts[0], parts[1]));
    } else if (parts.size() == 1) {
      terms.push_back(parts[0]);
    } else {
      terms.push_back(tape.scalar(0.0));
    }
    out.pairs.push_back(std::move(info));
  }

  out.loss = grad::scale(grad::sum_all(terms),
                         1.0 / static_cast<double>(batch.size()));
  return out;
}

grad::ScalarExpr scir_batch_expr(const ModelConfig& model,
                                 std::vector<PreferencePair> batch,
                                 std::vector<RefScores> refs, LossConfig config,
                                 ScirOptions options) {
  return [=](Tape& tape, Var params) {
    LmGraph g(tape, model, params);
    return scir_batch_loss(g, batch, refs, config, options).loss;
  };
}

grad::Var dpo_batch_loss(LmGraph& policy, std::span<const PreferencePair> batch,
                         std::span<const RefScores> refs, double beta) {
  if (batch.empty()) throw InvalidArgument("dpo_batch_loss on an empty batch");
  if (refs.size() != batch.size()) {
    throw InvalidArgument("dpo_batch_loss needs one RefScores per pair");
  }
  std::vector<Var> terms;
  terms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PreferencePair& pair = batch[i];
    if (!pair.agreed_label || *pair.agreed_label == Label::kUndefined) {
      throw InvalidArgument("baseline pair '" + pair.id + "' has no label");
    }
    terms.push_back(dpo_loss(policy, pair, *pair.agreed_label, refs[i].local_a,
                             refs[i].local_b, beta));
  }
  return grad::scale(grad::sum_all(terms),
                     1.0 / static_cast<double>(batch.size()));
}

double pointwise_judge_score(const Model& policy, const PointwiseTemplate& tpl,
                             const TokenSeq& prompt, const TokenSeq& response) {
  const TokenSeq filled = tpl.fill(prompt, response);
  if (static_cast<int>(filled.size()) > policy.config.context_len) {
    throw InvalidArgument("pointwise judge prompt exceeds the context length");
  }
  Tape tape;
  LmGraph g(tape, policy, false);
  Var logits = g.next_logits(filled);
  double o[5];
  double mx = -INFINITY;
  for (int k = 0; k < 5; ++k) {
    o[k] = logits.value(static_cast<std::size_t>(tpl.score_token(k + 1)));
    mx = std::max(mx, o[k]);
  }
  double z = 0.0;
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double w = std::exp(o[k] - mx);
    z += w;
    s += (k + 1) * w;
  }
  return s / z;
}

}  // namespace scir
