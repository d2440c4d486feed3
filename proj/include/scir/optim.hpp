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

#ifndef SCIR_OPTIM_HPP_
#define SCIR_OPTIM_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "scir/gradcore.hpp"

namespace scir {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables clipping
};

// Half-cosine decay from `base` at step 0 to 0 after `total` steps.
double cosine_lr(double base, std::size_t step, std::size_t total);

class AdamW {
 public:
  AdamW(std::size_t n, AdamWConfig config);

  // One decoupled-weight-decay Adam update. Parameters are rounded to f32
  // afterwards. Returns the pre-clip gradient norm.
  double step(grad::ParamVector& params, std::span<const double> grad,
              double lr);

  std::size_t steps() const noexcept { return t_; }

 private:
  AdamWConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace scir

#endif  // SCIR_OPTIM_HPP_
