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

#ifndef SCIR_GRADCORE_HPP_
#define SCIR_GRADCORE_HPP_

// Reverse-mode differentiation over a tape of dense row-major matrices.
//
// Every node is a rows x cols block of doubles; scalars are 1x1 nodes. Nodes
// that do not depend on a trainable leaf carry no gradient buffer and record
// no backward step, so frozen reference models cost only their forward pass.
//
// Two operations are first-class because the training objectives need them:
//   stop_gradient(x)  forward identity, blocks the backward pass.
//   Tape::indicator() piecewise-constant decisions (confidence masks, gates,
//                     hard labels); they never carry gradient.
// Both are recorded in creation order so finite-difference checks can replay
// them as frozen constants at perturbed parameters.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scir::grad {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const noexcept { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }

  int rows() const;
  int cols() const;
  std::size_t size() const;
  bool requires_grad() const;

  // Value of a 1x1 node.
  double value() const;
  double value(std::size_t flat_index) const;
  std::span<const double> values() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Recorded stop-gradient values and indicator decisions of one evaluation.
struct FrozenDecisions {
  std::vector<std::vector<double>> stop_gradient_values;
  std::vector<bool> indicators;
};

class Tape {
 public:
  enum class Mode { kNormal, kRecord, kReplay };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(std::vector<double> values, int rows, int cols, bool requires_grad);
  Var constant(std::vector<double> values, int rows, int cols);
  Var scalar(double v);

  // Seeds d(root)/d(root) = 1 and propagates to every reachable node.
  void backward(Var root);
  std::span<const double> grad(Var v) const;

  // Route every piecewise-constant decision through here. In replay mode the
  // recorded decision is returned instead of `computed`.
  bool indicator(bool computed);

  void record_into(FrozenDecisions* sink);
  void replay_from(const FrozenDecisions* source);
  Mode mode() const noexcept { return mode_; }

  std::size_t node_count() const noexcept { return nodes_.size(); }

  // --- low-level interface for op implementations ---------------------------
  using BackwardFn = std::function<void(Tape&)>;
  Var push(std::string_view op, int rows, int cols, std::vector<double> values,
           bool requires_grad);
  void set_backward(Var v, BackwardFn fn);
  const std::vector<double>& value_of(std::uint32_t id) const {
    return nodes_[id].value;
  }
  std::vector<double>& grad_of(std::uint32_t id) { return nodes_[id].grad; }
  bool requires_grad_of(std::uint32_t id) const {
    return nodes_[id].requires_grad;
  }
  int rows_of(std::uint32_t id) const { return nodes_[id].rows; }
  int cols_of(std::uint32_t id) const { return nodes_[id].cols; }
  const std::vector<double>* next_replayed_stop_gradient();
  void record_stop_gradient(const std::vector<double>& v);

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    bool requires_grad = false;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  Mode mode_ = Mode::kNormal;
  FrozenDecisions* record_ = nullptr;
  const FrozenDecisions* replay_ = nullptr;
  std::size_t replay_sg_cursor_ = 0;
  std::size_t replay_ind_cursor_ = 0;
};

// --- elementwise / scalar ops -------------------------------------------------
// Binary ops require equal shapes, except that a 1x1 operand broadcasts.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
// log(sigmoid(a)) evaluated as -softplus(-a).
Var log_sigmoid(Var a);
// log(1 + exp(a)) without overflow.
Var softplus(Var a);
Var relu(Var a);
Var gelu(Var a);
// Gradient is zero where the input lies outside [lo, hi].
Var clamp(Var a, double lo, double hi);
Var stop_gradient(Var a);

Var sum(Var a);
Var mean(Var a);
Var sum_all(std::span<const Var> terms);
// Max-shifted log(sum(exp(a))) over all entries.
Var logsumexp(Var a);
// Scalar at flat index i.
Var element(Var a, std::size_t i);

// --- matrix ops for the language model ---------------------------------------
Var slice(Var flat, std::size_t offset, int rows, int cols);
Var first_rows(Var a, int n);
Var matmul(Var a, Var b);
// x / rms(x) * gain, row-wise; gain is 1 x cols.
Var rms_norm(Var x, Var gain, double eps);
// Row-gather of `table` by token ids.
Var embed(Var table, std::span<const int> ids);
// qkv is T x 3d laid out [q | k | v]; returns T x d causal attention output.
Var causal_attention(Var qkv, int heads);
// Column vector of log_softmax(logits[rows[i]])[targets[i]].
Var log_softmax_pick(Var logits, std::span<const int> rows,
                     std::span<const int> targets);

// --- scalar expressions over a parameter vector -------------------------------

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  bool operator==(const ParamSlice&) const = default;
};

class ParamVector {
 public:
  ParamVector() = default;
  // Zero-initialized vector covering `layout` (offsets are assigned in order).
  explicit ParamVector(std::vector<ParamSlice> layout);
  static ParamVector flat(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  const std::vector<ParamSlice>& layout() const noexcept { return layout_; }
  const ParamSlice& slice(std::string_view name) const;
  std::span<double> view(std::string_view name);
  std::span<const double> view(std::string_view name) const;

  // Throws if any entry is non-finite or the layout has gaps/overlaps.
  void validate() const;

  bool operator==(const ParamVector& other) const = default;

 private:
  std::vector<ParamSlice> layout_;
  std::vector<double> values_;
};

// A scalar expression is a rule that rebuilds its graph on a fresh tape from
// the parameter leaf; evaluating at different parameters re-runs the rule.
using ScalarExpr = std::function<Var(Tape&, Var params)>;

double evaluate(const ScalarExpr& expr, const ParamVector& params);
ParamVector gradient(const ScalarExpr& expr, const ParamVector& params);

enum class EntryStatus { kPass, kSgBlocked, kFail };

struct GradCheckEntry {
  std::size_t index = 0;
  double analytic = 0.0;
  double fd_live = 0.0;    // central difference of the plain forward value
  double fd_frozen = 0.0;  // same, with sg values and indicators frozen
  EntryStatus status = EntryStatus::kPass;
};

struct GradCheckOptions {
  double rel_tol = 1e-5;
  // Check only these flat indices (all entries when empty).
  std::vector<std::size_t> indices;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_error = 0.0;  // max |analytic - fd_frozen|, scaled by max(1,|fd|)
  std::size_t passed = 0;
  std::size_t sg_blocked = 0;
  std::size_t failed = 0;
  bool ok() const noexcept { return failed == 0; }
};

GradCheckReport finite_diff_check(const ScalarExpr& expr,
                                  const ParamVector& params, double h,
                                  const GradCheckOptions& options = {});

}  // namespace scir::grad

#endif  // SCIR_GRADCORE_HPP_
