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

#include "scir/sft.hpp"

#include <cmath>
#include <numeric>

#include "scir/error.hpp"
#include "scir/rng.hpp"

namespace scir {

using grad::Tape;
using grad::Var;

void SftConfig::validate() const {
  if (epochs < 0) throw ConfigError("sft.epochs must be >= 0");
  if (!(learning_rate >= 0.0)) throw ConfigError("sft.learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("sft.batch_size must be >= 1");
  if (counts.task_demos + counts.judge_pairs + counts.point_demos == 0) {
    throw ConfigError("sft needs at least one demo");
  }
}

SftResult run_sft(const Model& start, const std::vector<SftRecord>& records,
                  const SftConfig& config, std::uint64_t seed,
                  const std::function<void(int, double)>& on_epoch) {
  config.validate();
  if (records.empty()) throw InvalidArgument("run_sft needs records");
  SftResult result{start, {}};
  Model& model = result.model;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (records.size() + bs - 1) / bs;
  const std::size_t total = steps_per_epoch * static_cast<std::size_t>(config.epochs);
  AdamW opt(model.params.size(), config.adamw);
  std::vector<std::size_t> order(records.size());
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs, ++step) {
      const std::size_t end = std::min(order.size(), begin + bs);
      std::vector<SftExample> batch;
      for (std::size_t j = begin; j < end; ++j) {
        const SftRecord& r = records[order[j]];
        batch.emplace_back(r.prompt, r.target);
      }
      const auto expr = sft_loss(model.config, std::move(batch));
      Tape tape;
      std::vector<double> values(model.params.values().begin(),
                                 model.params.values().end());
      Var leaf = tape.leaf(std::move(values),
                           static_cast<int>(model.params.size()), 1, true);
      Var loss = expr(tape, leaf);
      if (!std::isfinite(loss.value())) {
        throw NumericError("non-finite SFT loss at epoch " +
                           std::to_string(epoch) + " step " + std::to_string(step));
      }
      loss_sum += loss.value() * static_cast<double>(end - begin);
      tape.backward(loss);
      opt.step(model.params, tape.grad(leaf),
               cosine_lr(config.learning_rate, step, total));
    }
    const double mean = loss_sum / static_cast<double>(records.size());
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace scir
