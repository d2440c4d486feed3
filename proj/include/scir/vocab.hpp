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

#ifndef SCIR_VOCAB_HPP_
#define SCIR_VOCAB_HPP_

#include <vector>

namespace scir {

using Token = int;
using TokenSeq = std::vector<Token>;

// Reserved token layout of the synthetic vocabulary. Models may have a larger
// vocabulary; ids at or above kReservedCount are never emitted by templates.
namespace tok {

inline constexpr Token kEos = 0;
inline constexpr Token kSep = 1;
inline constexpr Token kOpCopy = 2;
inline constexpr Token kOpReverse = 3;
inline constexpr Token kOpSort = 4;
inline constexpr Token kDigit0 = 5;
inline constexpr int kMaxDigits = 8;

// Pairwise judge template 1 (leaderboard style).
inline constexpr Token kJudge1Begin = 13;
inline constexpr Token kJudge1Instr = 14;
inline constexpr Token kJudge1First = 15;
inline constexpr Token kJudge1Second = 16;
inline constexpr Token kJudge1Ask = 17;
// Pairwise judge template 2 (impartial-judge style).
inline constexpr Token kJudge2Begin = 18;
inline constexpr Token kJudge2Instr = 19;
inline constexpr Token kJudge2First = 20;
inline constexpr Token kJudge2Second = 21;
inline constexpr Token kJudge2Ask = 22;
// Shared verdicts: "first response is better" / "second response is better".
inline constexpr Token kVerdictFirst = 23;
inline constexpr Token kVerdictSecond = 24;
// Pointwise 5-point judge.
inline constexpr Token kPointBegin = 25;
inline constexpr Token kPointResp = 26;
inline constexpr Token kPointAsk = 27;
inline constexpr Token kScore1 = 28;  // kScore1 + k - 1 is score k, k in 1..5

inline constexpr int kReservedCount = 33;

constexpr Token digit(int d) { return kDigit0 + d; }
constexpr bool is_digit(Token t) {
  return t >= kDigit0 && t < kDigit0 + kMaxDigits;
}

}  // namespace tok
}  // namespace scir

#endif  // SCIR_VOCAB_HPP_
