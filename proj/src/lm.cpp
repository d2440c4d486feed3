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

#include "scir/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scir/error.hpp"

namespace scir {

using grad::Tape;
using grad::Var;

void ModelConfig::validate() const {
  if (vocab_size < 8) throw ConfigError("model.vocab_size must be >= 8");
  if (context_len < 2) throw ConfigError("model.context_len must be >= 2");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (model_dim < 1) throw ConfigError("model.model_dim must be >= 1");
  if (heads < 1 || model_dim % heads != 0) {
    throw ConfigError("model.model_dim must be divisible by model.heads");
  }
  if (mlp_mult < 1) throw ConfigError("model.mlp_mult must be >= 1");
}

std::vector<grad::ParamSlice> model_layout(const ModelConfig& c) {
  c.validate();
  const int d = c.model_dim;
  std::vector<grad::ParamSlice> layout;
  layout.push_back({"tok_emb", 0, c.vocab_size, d});
  layout.push_back({"pos_emb", 0, c.context_len, d});
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    layout.push_back({p + "norm1", 0, 1, d});
    layout.push_back({p + "wqkv", 0, d, 3 * d});
    layout.push_back({p + "wo", 0, d, d});
    layout.push_back({p + "norm2", 0, 1, d});
    layout.push_back({p + "w1", 0, d, c.mlp_mult * d});
    layout.push_back({p + "w2", 0, c.mlp_mult * d, d});
  }
  layout.push_back({"norm_f", 0, 1, d});
  layout.push_back({"w_out", 0, d, c.vocab_size});
  return layout;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& s : model_layout(config)) n += s.size();
  return n;
}

grad::ParamVector init_params(const ModelConfig& config) {
  grad::ParamVector params(model_layout(config));
  Rng rng(derive_seed(config.seed, hash_label("init_params")));
  const double d = config.model_dim;
  const double residual_scale = 1.0 / std::sqrt(2.0 * config.layers);
  for (const auto& s : params.layout()) {
    auto v = params.view(s.name);
    const std::string_view name = s.name;
    double std_dev = 0.0;
    if (name.ends_with("norm1") || name.ends_with("norm2") ||
        name == "norm_f") {
      std::fill(v.begin(), v.end(), 1.0);
      continue;
    }
    if (name == "tok_emb" || name == "pos_emb") {
      std_dev = 0.3;
    } else if (name.ends_with("wo") || name.ends_with("w2")) {
      std_dev = residual_scale / std::sqrt(static_cast<double>(s.rows));
    } else if (name == "w_out") {
      std_dev = 0.5 / std::sqrt(d);
    } else {
      std_dev = 1.0 / std::sqrt(static_cast<double>(s.rows));
    }
    for (double& x : v) x = std_dev * rng.normal();
  }
  quantize_to_f32(params);
  return params;
}

Model make_model(const ModelConfig& config) {
  return Model{config, init_params(config)};
}

void quantize_to_f32(grad::ParamVector& params) {
  for (double& x : params.values()) x = static_cast<double>(static_cast<float>(x));
}

// --- LmGraph ----------------------------------------------------------------------

LmGraph::LmGraph(Tape& tape, const ModelConfig& config, Var params)
    : tape_(&tape), config_(config), params_(params) {
  bind();
}

LmGraph::LmGraph(Tape& tape, const Model& model, bool trainable)
    : tape_(&tape), config_(model.config) {
  std::vector<double> v(model.params.values().begin(),
                        model.params.values().end());
  params_ = tape.leaf(std::move(v), static_cast<int>(model.params.size()), 1,
                      trainable);
  bind();
}

void LmGraph::bind() {
  const auto layout = model_layout(config_);
  std::size_t total = 0;
  for (const auto& s : layout) total += s.size();
  if (params_.size() != total) {
    throw InvalidArgument("parameter vector size does not match model config");
  }
  std::size_t offset = 0;
  auto take = [&](const grad::ParamSlice& s) {
    Var v = grad::slice(params_, offset, s.rows, s.cols);
    offset += s.size();
    return v;
  };
  std::size_t i = 0;
  tok_emb_ = take(layout[i++]);
  pos_emb_ = take(layout[i++]);
  blocks_.clear();
  for (int l = 0; l < config_.layers; ++l) {
    Block b;
    b.norm1 = take(layout[i++]);
    b.wqkv = take(layout[i++]);
    b.wo = take(layout[i++]);
    b.norm2 = take(layout[i++]);
    b.w1 = take(layout[i++]);
    b.w2 = take(layout[i++]);
    blocks_.push_back(b);
  }
  norm_f_ = take(layout[i++]);
  w_out_ = take(layout[i++]);
}

Var LmGraph::logits(std::span<const Token> seq) {
  const int T = static_cast<int>(seq.size());
  if (T == 0) throw InvalidArgument("cannot run the model on an empty sequence");
  if (T > config_.context_len) {
    throw InvalidArgument("sequence of length " + std::to_string(T) +
                          " exceeds context_len " +
                          std::to_string(config_.context_len));
  }
  for (Token t : seq) {
    if (t < 0 || t >= config_.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(t) +
                            " outside the vocabulary");
    }
  }
  std::vector<int> ids(seq.begin(), seq.end());
  Var x = grad::add(grad::embed(tok_emb_, ids), grad::first_rows(pos_emb_, T));
  for (const Block& b : blocks_) {
    Var h = grad::rms_norm(x, b.norm1, kNormEps);
    Var att = grad::causal_attention(grad::matmul(h, b.wqkv), config_.heads);
    x = grad::add(x, grad::matmul(att, b.wo));
    Var h2 = grad::rms_norm(x, b.norm2, kNormEps);
    Var m = grad::matmul(grad::gelu(grad::matmul(h2, b.w1)), b.w2);
    x = grad::add(x, m);
  }
  return grad::matmul(grad::rms_norm(x, norm_f_, kNormEps), w_out_);
}

Var LmGraph::sequence_logprob(const TokenSeq& prompt, const TokenSeq& response) {
  if (response.empty()) throw InvalidArgument("empty response");
  if (prompt.empty()) throw InvalidArgument("empty prompt");
  TokenSeq seq = prompt;
  seq.insert(seq.end(), response.begin(), response.end());
  Var l = logits(seq);
  std::vector<int> rows(response.size());
  std::vector<int> targets(response.begin(), response.end());
  for (std::size_t i = 0; i < response.size(); ++i) {
    rows[i] = static_cast<int>(prompt.size() + i) - 1;
  }
  return grad::sum(grad::log_softmax_pick(l, rows, targets));
}

Var LmGraph::next_logits(const TokenSeq& prompt) {
  Var l = logits(prompt);
  const int V = config_.vocab_size;
  return grad::slice(l, static_cast<std::size_t>(l.rows() - 1) * V, 1, V);
}

Var LmGraph::verdict_probability(const TokenSeq& judge_prompt, Token verdict_a,
                                 Token verdict_b, double offset_a,
                                 double offset_b) {
  if (verdict_a == verdict_b) {
    throw InvalidArgument("verdict tokens must differ");
  }
  if (verdict_a < 0 || verdict_b < 0 || verdict_a >= config_.vocab_size ||
      verdict_b >= config_.vocab_size) {
    throw InvalidArgument("verdict token outside the vocabulary");
  }
  Var o = next_logits(judge_prompt);
  Var oa = grad::element(o, static_cast<std::size_t>(verdict_a));
  Var ob = grad::element(o, static_cast<std::size_t>(verdict_b));
  Var gap = grad::sub(oa, ob);
  if (offset_a != 0.0 || offset_b != 0.0) {
    gap = grad::add_scalar(gap, offset_b - offset_a);
  }
  return grad::sigmoid(gap);
}

// --- plain-value helpers -------------------------------------------------------------

double sequence_logprob(const Model& model, const TokenSeq& prompt,
                        const TokenSeq& response) {
  Tape tape;
  LmGraph g(tape, model, false);
  return g.sequence_logprob(prompt, response).value();
}

double verdict_probability(const Model& model, const TokenSeq& judge_prompt,
                           Token verdict_a, Token verdict_b) {
  Tape tape;
  LmGraph g(tape, model, false);
  return g.verdict_probability(judge_prompt, verdict_a, verdict_b).value();
}

std::vector<double> next_token_distribution(const Model& model,
                                            const TokenSeq& prompt,
                                            double temperature) {
  Tape tape;
  LmGraph g(tape, model, false);
  const auto logits = g.next_logits(prompt).values();
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& x : p) {
    x = std::exp((x - m) / temperature);
    z += x;
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> nucleus_filter(std::span<const double> probs, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw InvalidArgument("top_p must lie in (0, 1]");
  }
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  std::vector<double> out(probs.size(), 0.0);
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += probs[order[keep]];
    ++keep;
    if (mass >= top_p) break;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < keep; ++i) z += probs[order[i]];
  for (std::size_t i = 0; i < keep; ++i) {
    out[order[i]] = probs[order[i]] / z;
  }
  return out;
}

namespace {

Token draw(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  Token last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    c += probs[i];
    last = static_cast<Token>(i);
    if (u < c) return last;
  }
  return last;
}

}  // namespace

TokenSeq sample_response(const Model& model, const TokenSeq& prompt,
                         double temperature, double top_p, int max_len,
                         Rng& rng) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw InvalidArgument("top_p must lie in (0, 1]");
  }
  TokenSeq seq = prompt;
  TokenSeq out;
  while (static_cast<int>(out.size()) < max_len &&
         static_cast<int>(seq.size()) < model.config.context_len) {
    Token next = 0;
    if (temperature < kGreedyTemperature) {
      Tape tape;
      LmGraph g(tape, model, false);
      const auto logits = g.next_logits(seq).values();
      next = static_cast<Token>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
    } else {
      const auto probs = next_token_distribution(model, seq, temperature);
      next = draw(nucleus_filter(probs, top_p), rng);
    }
    out.push_back(next);
    seq.push_back(next);
    if (next == tok::kEos) break;
  }
  return out;
}

TokenSeq greedy_response(const Model& model, const TokenSeq& prompt,
                         int max_len) {
  Rng unused(0);
  return sample_response(model, prompt, kGreedyTemperature / 2, 1.0, max_len,
                         unused);
}

grad::ScalarExpr sft_loss(const ModelConfig& config,
                          std::vector<SftExample> batch) {
  if (batch.empty()) throw InvalidArgument("sft_loss on an empty batch");
  return [config, batch = std::move(batch)](Tape& tape, Var params) {
    LmGraph g(tape, config, params);
    std::vector<Var> terms;
    terms.reserve(batch.size());
    for (const auto& [prompt, target] : batch) {
      terms.push_back(g.sequence_logprob(prompt, target));
    }
    return grad::scale(grad::sum_all(terms),
                       -1.0 / static_cast<double>(batch.size()));
  };
}

}  // namespace scir
