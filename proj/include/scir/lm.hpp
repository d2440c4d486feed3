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

#ifndef SCIR_LM_HPP_
#define SCIR_LM_HPP_

// Tiny pre-norm decoder-only transformer. One parameter set serves as the
// response generator, the judge (next-token verdict readout) and, frozen, as
// a reference model.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scir/gradcore.hpp"
#include "scir/rng.hpp"
#include "scir/vocab.hpp"

namespace scir {

struct ModelConfig {
  int vocab_size = 40;
  int context_len = 48;
  int layers = 2;
  int model_dim = 48;
  int heads = 4;
  int mlp_mult = 4;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kNormEps = 1e-5;

std::vector<grad::ParamSlice> model_layout(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);

// Scaled normal initialization, deterministic in config.seed.
grad::ParamVector init_params(const ModelConfig& config);

struct Model {
  ModelConfig config;
  grad::ParamVector params;
};

Model make_model(const ModelConfig& config);

// Rounds every parameter to the nearest float, the storage precision of
// checkpoints and training state.
void quantize_to_f32(grad::ParamVector& params);

// A model bound onto a tape. Weight slices are taken once per binding, so
// several sequences evaluated on the same tape share them.
class LmGraph {
 public:
  // Binds to an existing parameter node (used by ScalarExpr rules).
  LmGraph(grad::Tape& tape, const ModelConfig& config, grad::Var params);
  // Binds a model as a new leaf; `trainable` controls gradient tracking.
  LmGraph(grad::Tape& tape, const Model& model, bool trainable);

  grad::Tape& tape() const { return *tape_; }
  const ModelConfig& config() const { return config_; }
  grad::Var params() const { return params_; }

  // T x vocab logits for every position of `seq`.
  grad::Var logits(std::span<const Token> seq);

  // Sum over response tokens of log p(token | preceding tokens).
  grad::Var sequence_logprob(const TokenSeq& prompt, const TokenSeq& response);

  // Logits of the token that would follow `prompt` (1 x vocab).
  grad::Var next_logits(const TokenSeq& prompt);

  // exp(o_a) / (exp(o_a) + exp(o_b)) at the next-token position, with optional
  // offsets subtracted from each logit first.
  grad::Var verdict_probability(const TokenSeq& judge_prompt, Token verdict_a,
                                Token verdict_b, double offset_a = 0.0,
                                double offset_b = 0.0);

 private:
  struct Block {
    grad::Var norm1, wqkv, wo, norm2, w1, w2;
  };
  void bind();

  grad::Tape* tape_;
  ModelConfig config_;
  grad::Var params_;
  grad::Var tok_emb_, pos_emb_, norm_f_, w_out_;
  std::vector<Block> blocks_;
};

// Plain-value conveniences; each builds a gradient-free tape.
double sequence_logprob(const Model& model, const TokenSeq& prompt,
                        const TokenSeq& response);
double verdict_probability(const Model& model, const TokenSeq& judge_prompt,
                           Token verdict_a, Token verdict_b);
std::vector<double> next_token_distribution(const Model& model,
                                            const TokenSeq& prompt,
                                            double temperature);

// Keeps the smallest probability-sorted prefix whose mass reaches top_p and
// renormalizes. Ties in probability keep the lower token id first.
std::vector<double> nucleus_filter(std::span<const double> probs, double top_p);

inline constexpr double kGreedyTemperature = 1e-6;

// Samples until the end token (included in the result) or max_len tokens.
TokenSeq sample_response(const Model& model, const TokenSeq& prompt,
                         double temperature, double top_p, int max_len,
                         Rng& rng);
TokenSeq greedy_response(const Model& model, const TokenSeq& prompt,
                         int max_len);

using SftExample = std::pair<TokenSeq, TokenSeq>;  // (prompt, target)

// Mean negative log-likelihood of targets given prompts.
grad::ScalarExpr sft_loss(const ModelConfig& config,
                          std::vector<SftExample> batch);

}  // namespace scir

#endif  // SCIR_LM_HPP_
