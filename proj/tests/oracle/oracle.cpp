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

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scir/rng.hpp"
#include "scir/vocab.hpp"

namespace oracle {

namespace {

constexpr Real kClamp = 1e-7L;

Real log_softmax_at(const std::vector<Real>& logits, std::size_t i) {
  Real m = logits[0];
  for (Real x : logits) m = std::max(m, x);
  Real s = 0.0L;
  for (Real x : logits) s += std::exp(x - m);
  return logits[i] - m - std::log(s);
}

}  // namespace

Hard hard_label(Real p, Real epsilon_tie) {
  if (p > 0.5L + epsilon_tie) return Hard::kA;
  if (p < 0.5L - epsilon_tie) return Hard::kB;
  return Hard::kUndefined;
}

Real sigmoid(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

Real softplus(Real x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Real clamp_prob(Real p) { return std::clamp(p, kClamp, 1.0L - kClamp); }

Real bernoulli_kl(Real q, Real p) {
  q = clamp_prob(q);
  p = clamp_prob(p);
  return q * std::log(q / p) + (1.0L - q) * std::log((1.0L - q) / (1.0L - p));
}

Real bernoulli_entropy(Real q) {
  q = clamp_prob(q);
  return -(q * std::log(q) + (1.0L - q) * std::log(1.0L - q));
}

Real cross_entropy(Real q, Real p) {
  q = clamp_prob(q);
  p = clamp_prob(p);
  return -(q * std::log(p) + (1.0L - q) * std::log(1.0L - p));
}

Real dpo_loss(Real logratio_w, Real logratio_l, Real beta) {
  return softplus(-beta * (logratio_w - logratio_l));
}

Real bruteforce_consistency_loss(Real p, Real q, Real tau, bool literal) {
  const auto confident = [&](Real x) {
    return literal ? x > tau : std::max(x, 1.0L - x) > tau;
  };
  Real total = 0.0L;
  if (confident(p)) total += bernoulli_kl(q, p) + bernoulli_entropy(q);
  if (confident(q)) total += bernoulli_kl(p, q) + bernoulli_entropy(p);
  return total;
}

EnumPolicy::EnumPolicy(std::vector<Seq> responses, std::vector<Real> logits)
    : responses_(std::move(responses)), logits_(std::move(logits)) {
  if (responses_.size() != logits_.size() || responses_.empty() ||
      responses_.size() > 16) {
    throw std::invalid_argument("EnumPolicy needs 1..16 responses, one logit each");
  }
}

Real EnumPolicy::log_prob(const Seq&, const Seq& response) const {
  for (std::size_t i = 0; i < responses_.size(); ++i) {
    if (responses_[i] == response) return log_softmax_at(logits_, i);
  }
  throw std::out_of_range("response outside the enumerated set");
}

Real EnumPolicy::probability_sum() const {
  Real s = 0.0L;
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    s += std::exp(log_softmax_at(logits_, i));
  }
  return s;
}

BigramTable::BigramTable(std::vector<std::vector<Real>> logits)
    : logits_(std::move(logits)) {
  for (const auto& row : logits_) {
    if (row.size() != logits_.size()) throw std::invalid_argument("table not square");
  }
}

const std::vector<Real>& BigramTable::next_logits(int token) const {
  return logits_.at(static_cast<std::size_t>(token));
}

Real BigramTable::log_prob(const Seq& prompt, const Seq& response) const {
  Real total = 0.0L;
  int prev = prompt.back();
  for (int t : response) {
    total += log_softmax_at(next_logits(prev), static_cast<std::size_t>(t));
    prev = t;
  }
  return total;
}

Real enum_irm_preference(const LogProbTable& policy, const LogProbTable& ref,
                         const Seq& prompt, const Seq& a, const Seq& b,
                         Real beta, Real alpha_l) {
  const Real ratio_a = policy.log_prob(prompt, a) - ref.log_prob(prompt, a);
  const Real ratio_b = policy.log_prob(prompt, b) - ref.log_prob(prompt, b);
  const Real len_gap = static_cast<Real>(a.size()) - static_cast<Real>(b.size());
  return sigmoid(beta * (ratio_a - ratio_b) - alpha_l * len_gap);
}

Seq judge_prompt(int template_index, const Seq& prompt, const Seq& first,
                 const Seq& second) {
  namespace tok = scir::tok;
  Seq out;
  const auto put = [&](const Seq& s) { out.insert(out.end(), s.begin(), s.end()); };
  if (template_index == 0) {
    out.push_back(tok::kJudge1Begin);
    out.push_back(tok::kJudge1Instr);
    put(prompt);
    out.push_back(tok::kJudge1First);
    put(first);
    out.push_back(tok::kJudge1Second);
    put(second);
    out.push_back(tok::kJudge1Ask);
  } else {
    out.push_back(tok::kJudge2Begin);
    out.push_back(tok::kJudge2First);
    put(first);
    out.push_back(tok::kJudge2Second);
    put(second);
    out.push_back(tok::kJudge2Instr);
    put(prompt);
    out.push_back(tok::kJudge2Ask);
  }
  return out;
}

GrmOracle enum_grm_preference(const BigramTable& judge, const Seq& prompt,
                              const Seq& a, const Seq& b, Real alpha_l,
                              Real epsilon_tie, bool single) {
  GrmOracle out;
  for (int tpl = 0; tpl < 2; ++tpl) {
    for (int swap = 0; swap < 2; ++swap) {
      if (single && (tpl > 0 || swap > 0)) continue;
      const Seq& first = swap ? b : a;
      const Seq& second = swap ? a : b;
      const Seq jp = judge_prompt(tpl, prompt, first, second);
      const auto& o = judge.next_logits(jp.back());
      const Real u_first = o[scir::tok::kVerdictFirst] -
                           alpha_l * static_cast<Real>(first.size());
      const Real u_second = o[scir::tok::kVerdictSecond] -
                            alpha_l * static_cast<Real>(second.size());
      const Real p_first = std::exp(u_first) / (std::exp(u_first) + std::exp(u_second));
      out.variants.push_back(swap ? 1.0L - p_first : p_first);
    }
  }
  Real s = 0.0L;
  for (Real v : out.variants) s += v;
  out.p = s / static_cast<Real>(out.variants.size());
  const Hard first_label = hard_label(out.variants[0], epsilon_tie);
  out.position_consistent = first_label != Hard::kUndefined;
  for (Real v : out.variants) {
    if (hard_label(v, epsilon_tie) != first_label) out.position_consistent = false;
  }
  return out;
}

GateReport exhaustive_gate_check(const std::vector<GateInput>& batch,
                                 const std::vector<bool>& library_mask,
                                 Real epsilon_tie) {
  GateReport report;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& in = batch[i];
    // Every variant must carry the IRM's label; the mean then does too.
    const Hard irm = hard_label(in.p_irm, epsilon_tie);
    Real mean = 0.0L;
    bool all_match = irm != Hard::kUndefined;
    for (Real v : in.grm_variants) {
      mean += v;
      if (hard_label(v, epsilon_tie) != irm) all_match = false;
    }
    mean /= static_cast<Real>(in.grm_variants.size());
    const bool open = all_match && hard_label(mean, epsilon_tie) == irm;
    report.expected.push_back(open);
    if (i >= library_mask.size() || library_mask[i] != open) {
      report.mismatches.push_back(i);
    }
  }
  for (std::size_t i = batch.size(); i < library_mask.size(); ++i) {
    report.mismatches.push_back(i);
  }
  return report;
}

std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

scir::Model build_forced_model(const BigramTable& table, int context_len,
                               double embed_scale, std::uint64_t seed) {
  const int v = table.vocab();
  scir::ModelConfig config;
  config.vocab_size = v;
  config.context_len = context_len;
  config.layers = 1;
  config.model_dim = v;
  config.heads = 1;
  config.mlp_mult = 1;
  config.seed = seed;
  scir::Model model = scir::make_model(config);
  auto& p = model.params;
  scir::Rng rng(seed);
  const auto fill = [&](const std::string& name, auto value) {
    auto view = p.view(name);
    for (std::size_t i = 0; i < view.size(); ++i) view[i] = value(i);
  };
  const auto vs = static_cast<std::size_t>(v);
  fill("tok_emb", [&](std::size_t i) { return i / vs == i % vs ? embed_scale : 0.0; });
  fill("pos_emb", [](std::size_t) { return 0.0; });
  // Attention and MLP inputs stay random; their outputs are projected to zero.
  fill("block0.wqkv", [&](std::size_t) { return rng.normal(); });
  fill("block0.w1", [&](std::size_t) { return rng.normal(); });
  fill("block0.wo", [](std::size_t) { return 0.0; });
  fill("block0.w2", [](std::size_t) { return 0.0; });
  fill("block0.norm1", [](std::size_t) { return 1.0; });
  fill("block0.norm2", [](std::size_t) { return 1.0; });
  fill("norm_f", [](std::size_t) { return 1.0; });
  const long double s = embed_scale;
  const long double k = s / std::sqrt(s * s / v + static_cast<long double>(scir::kNormEps));
  fill("w_out", [&](std::size_t i) {
    return static_cast<double>(table.next_logits(static_cast<int>(i / vs))[i % vs] / k);
  });
  return model;
}

}  // namespace oracle
