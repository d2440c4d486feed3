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

#ifndef SCIR_JUDGE_TEMPLATES_HPP_
#define SCIR_JUDGE_TEMPLATES_HPP_

// Token-level judge prompts. Two pairwise templates with different layouts
// share the verdict tokens; the pointwise template reads one of five score
// tokens.

#include <array>
#include <string_view>

#include "scir/vocab.hpp"

namespace scir {

enum class TemplateId { kT1, kT2 };
enum class Order { kAB, kBA };

std::string_view to_string(TemplateId id);
std::string_view to_string(Order o);

struct JudgePromptTemplate {
  TemplateId id;
  Token begin;
  Token instr;
  Token first_marker;
  Token second_marker;
  Token ask;
  Token verdict_first;
  Token verdict_second;
  // T1 places the instruction before the responses, T2 after them.
  bool instruction_first;

  TokenSeq fill(const TokenSeq& prompt, const TokenSeq& first,
                const TokenSeq& second) const;
  void validate(int vocab_size) const;
};

const JudgePromptTemplate& judge_template(TemplateId id);

// The four (template, order) variants in canonical order
// {T1xAB, T1xBA, T2xAB, T2xBA}.
struct JudgeVariant {
  TemplateId id;
  Order order;
};
inline constexpr std::array<JudgeVariant, 4> kJudgeVariants{{
    {TemplateId::kT1, Order::kAB},
    {TemplateId::kT1, Order::kBA},
    {TemplateId::kT2, Order::kAB},
    {TemplateId::kT2, Order::kBA},
}};

struct PointwiseTemplate {
  Token begin = tok::kPointBegin;
  Token response_marker = tok::kPointResp;
  Token ask = tok::kPointAsk;
  Token score1 = tok::kScore1;

  TokenSeq fill(const TokenSeq& prompt, const TokenSeq& response) const;
  Token score_token(int score) const { return score1 + score - 1; }
};

}  // namespace scir

#endif  // SCIR_JUDGE_TEMPLATES_HPP_
