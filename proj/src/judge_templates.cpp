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

#include "scir/judge_templates.hpp"

#include "scir/error.hpp"
#include "scir/preference.hpp"

namespace scir {

std::string_view to_string(TemplateId id) {
  return id == TemplateId::kT1 ? "T1" : "T2";
}

std::string_view to_string(Order o) { return o == Order::kAB ? "AB" : "BA"; }

TokenSeq JudgePromptTemplate::fill(const TokenSeq& prompt,
                                   const TokenSeq& first,
                                   const TokenSeq& second) const {
  TokenSeq out;
  out.reserve(prompt.size() + first.size() + second.size() + 5);
  out.push_back(begin);
  auto put_instruction = [&] {
    out.push_back(instr);
    out.insert(out.end(), prompt.begin(), prompt.end());
  };
  if (instruction_first) put_instruction();
  out.push_back(first_marker);
  out.insert(out.end(), first.begin(), first.end());
  out.push_back(second_marker);
  out.insert(out.end(), second.begin(), second.end());
  if (!instruction_first) put_instruction();
  out.push_back(ask);
  return out;
}

void JudgePromptTemplate::validate(int vocab_size) const {
  if (verdict_first == verdict_second) {
    throw InvalidArgument("judge template verdict tokens must differ");
  }
  for (Token t : {begin, instr, first_marker, second_marker, ask,
                  verdict_first, verdict_second}) {
    if (t < 0 || t >= vocab_size) {
      throw InvalidArgument("judge template token outside the vocabulary");
    }
  }
}

const JudgePromptTemplate& judge_template(TemplateId id) {
  static const JudgePromptTemplate t1{
      TemplateId::kT1,    tok::kJudge1Begin,  tok::kJudge1Instr,
      tok::kJudge1First,  tok::kJudge1Second, tok::kJudge1Ask,
      tok::kVerdictFirst, tok::kVerdictSecond, true};
  static const JudgePromptTemplate t2{
      TemplateId::kT2,    tok::kJudge2Begin,  tok::kJudge2Instr,
      tok::kJudge2First,  tok::kJudge2Second, tok::kJudge2Ask,
      tok::kVerdictFirst, tok::kVerdictSecond, false};
  return id == TemplateId::kT1 ? t1 : t2;
}

TokenSeq PointwiseTemplate::fill(const TokenSeq& prompt,
                                 const TokenSeq& response) const {
  TokenSeq out;
  out.reserve(prompt.size() + response.size() + 3);
  out.push_back(begin);
  out.insert(out.end(), prompt.begin(), prompt.end());
  out.push_back(response_marker);
  out.insert(out.end(), response.begin(), response.end());
  out.push_back(ask);
  return out;
}

// --- preference.hpp --------------------------------------------------------------

std::string_view to_string(Label l) {
  switch (l) {
    case Label::kA:
      return "A";
    case Label::kB:
      return "B";
    case Label::kUndefined:
      break;
  }
  return "undefined";
}

std::string_view to_string(GoldLabel l) {
  switch (l) {
    case GoldLabel::kA:
      return "A";
    case GoldLabel::kB:
      return "B";
    case GoldLabel::kTie:
      break;
  }
  return "tie";
}

Label label_from_string(std::string_view s) {
  if (s == "A") return Label::kA;
  if (s == "B") return Label::kB;
  if (s == "undefined") return Label::kUndefined;
  throw InvalidArgument("bad label '" + std::string(s) + "'");
}

GoldLabel gold_label_from_string(std::string_view s) {
  if (s == "A") return GoldLabel::kA;
  if (s == "B") return GoldLabel::kB;
  if (s == "tie") return GoldLabel::kTie;
  throw InvalidArgument("bad gold label '" + std::string(s) + "'");
}

PreferencePair PreferencePair::swapped() const {
  PreferencePair p = *this;
  std::swap(p.response_a, p.response_b);
  if (p.gold_label && *p.gold_label != GoldLabel::kTie) {
    p.gold_label = *p.gold_label == GoldLabel::kA ? GoldLabel::kB : GoldLabel::kA;
  }
  if (p.agreed_label && *p.agreed_label != Label::kUndefined) {
    p.agreed_label = *p.agreed_label == Label::kA ? Label::kB : Label::kA;
  }
  return p;
}

}  // namespace scir
