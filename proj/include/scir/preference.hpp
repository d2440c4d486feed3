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

#ifndef SCIR_PREFERENCE_HPP_
#define SCIR_PREFERENCE_HPP_

#include <optional>
#include <string>
#include <string_view>

#include "scir/vocab.hpp"

namespace scir {

// Hard preference label of an internal reward model.
enum class Label { kA, kB, kUndefined };
// Label assigned by the gold oracle.
enum class GoldLabel { kA, kB, kTie };

std::string_view to_string(Label l);
std::string_view to_string(GoldLabel l);
Label label_from_string(std::string_view s);
GoldLabel gold_label_from_string(std::string_view s);

struct PreferencePair {
  std::string id;
  TokenSeq prompt;
  TokenSeq response_a;
  TokenSeq response_b;
  std::optional<GoldLabel> gold_label;
  std::optional<Label> agreed_label;  // kA or kB when present

  PreferencePair swapped() const;
};

}  // namespace scir

#endif  // SCIR_PREFERENCE_HPP_
