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

#include "scir/optim.hpp"

#include <cmath>
#include <numbers>

#include "scir/error.hpp"
#include "scir/lm.hpp"

namespace scir {

double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total == 0) return base;
  const double frac =
      std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamW::AdamW(std::size_t n, AdamWConfig config)
    : config_(config), m_(n, 0.0), v_(n, 0.0) {}

double AdamW::step(grad::ParamVector& params, std::span<const double> grad,
                   double lr) {
  if (grad.size() != params.size() || grad.size() != m_.size()) {
    throw InvalidArgument("AdamW::step size mismatch");
  }
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double clip = config_.grad_clip > 0.0 && norm > config_.grad_clip
                          ? config_.grad_clip / norm
                          : 1.0;
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto p = params.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i] * clip;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double update = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
    p[i] -= lr * (update + config_.weight_decay * p[i]);
  }
  quantize_to_f32(params);
  return norm;
}

}  // namespace scir
