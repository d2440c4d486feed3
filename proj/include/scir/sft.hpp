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

#ifndef SCIR_SFT_HPP_
#define SCIR_SFT_HPP_

// Supervised fine-tuning on task demos and judge demos.

#include <cstdint>
#include <functional>
#include <vector>

#include "scir/lm.hpp"
#include "scir/optim.hpp"
#include "scir/tasks.hpp"

namespace scir {

struct SftConfig {
  SftCounts counts;
  int epochs = 8;
  double learning_rate = 3e-3;
  int batch_size = 16;
  AdamWConfig adamw;

  void validate() const;
};

struct SftResult {
  Model model;
  std::vector<double> epoch_losses;  // mean per-example NLL of each epoch
};

// Shuffled minibatch AdamW with a cosine schedule over all steps.
SftResult run_sft(const Model& start, const std::vector<SftRecord>& records,
                  const SftConfig& config, std::uint64_t seed,
                  const std::function<void(int, double)>& on_epoch = {});

}  // namespace scir

#endif  // SCIR_SFT_HPP_
