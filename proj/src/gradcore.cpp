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

#include "scir/gradcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <cblas.h>

#include "scir/error.hpp"

namespace scir::grad {

// --- Var ----------------------------------------------------------------------

int Var::rows() const { return tape_->rows_of(id_); }
int Var::cols() const { return tape_->cols_of(id_); }
std::size_t Var::size() const { return tape_->value_of(id_).size(); }
bool Var::requires_grad() const { return tape_->requires_grad_of(id_); }

double Var::value() const {
  const auto& v = tape_->value_of(id_);
  if (v.size() != 1) {
    throw InvalidArgument("Var::value() on a non-scalar node");
  }
  return v[0];
}

double Var::value(std::size_t flat_index) const {
  return tape_->value_of(id_).at(flat_index);
}

std::span<const double> Var::values() const { return tape_->value_of(id_); }

// --- Tape ---------------------------------------------------------------------

Var Tape::push(std::string_view op, int rows, int cols,
               std::vector<double> values, bool requires_grad) {
  for (double x : values) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite value produced by op '" +
                         std::string(op) + "'");
    }
  }
  Node node;
  node.rows = rows;
  node.cols = cols;
  node.requires_grad = requires_grad;
  if (requires_grad) node.grad.assign(values.size(), 0.0);
  node.value = std::move(values);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::set_backward(Var v, BackwardFn fn) {
  nodes_[v.id()].backward = std::move(fn);
}

Var Tape::leaf(std::vector<double> values, int rows, int cols,
               bool requires_grad) {
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) !=
      values.size()) {
    throw InvalidArgument("leaf shape does not match value count");
  }
  return push("leaf", rows, cols, std::move(values), requires_grad);
}

Var Tape::constant(std::vector<double> values, int rows, int cols) {
  return leaf(std::move(values), rows, cols, false);
}

Var Tape::scalar(double v) { return push("scalar", 1, 1, {v}, false); }

void Tape::backward(Var root) {
  if (root.size() != 1) {
    throw InvalidArgument("backward() requires a scalar root");
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad[0] += 1.0;
  for (std::int64_t i = root.id(); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.requires_grad && node.backward) node.backward(*this);
  }
}

std::span<const double> Tape::grad(Var v) const {
  return nodes_[v.id()].grad;
}

bool Tape::indicator(bool computed) {
  switch (mode_) {
    case Mode::kRecord:
      record_->indicators.push_back(computed);
      return computed;
    case Mode::kReplay:
      if (replay_ind_cursor_ >= replay_->indicators.size()) {
        throw InvalidArgument("indicator replay ran past the recording");
      }
      return replay_->indicators[replay_ind_cursor_++];
    case Mode::kNormal:
      break;
  }
  return computed;
}

void Tape::record_into(FrozenDecisions* sink) {
  mode_ = Mode::kRecord;
  record_ = sink;
}

void Tape::replay_from(const FrozenDecisions* source) {
  mode_ = Mode::kReplay;
  replay_ = source;
  replay_sg_cursor_ = 0;
  replay_ind_cursor_ = 0;
}

const std::vector<double>* Tape::next_replayed_stop_gradient() {
  if (mode_ != Mode::kReplay) return nullptr;
  if (replay_sg_cursor_ >= replay_->stop_gradient_values.size()) {
    throw InvalidArgument("stop_gradient replay ran past the recording");
  }
  return &replay_->stop_gradient_values[replay_sg_cursor_++];
}

void Tape::record_stop_gradient(const std::vector<double>& v) {
  if (mode_ == Mode::kRecord) record_->stop_gradient_values.push_back(v);
}

// --- helpers ------------------------------------------------------------------

namespace {

void check_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw InvalidArgument("operands live on different tapes");
  }
}

// Shape of a binary elementwise op, allowing a 1x1 operand to broadcast.
struct BinaryShape {
  int rows;
  int cols;
  bool a_scalar;
  bool b_scalar;
};

BinaryShape binary_shape(Var a, Var b, std::string_view op) {
  check_same_tape(a, b);
  const bool as = a.size() == 1;
  const bool bs = b.size() == 1;
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return {a.rows(), a.cols(), false, false};
  }
  if (as) return {b.rows(), b.cols(), true, false};
  if (bs) return {a.rows(), a.cols(), false, true};
  throw InvalidArgument("shape mismatch in op '" + std::string(op) + "'");
}

// Accumulates g (shaped like the output) into an operand that may have been
// broadcast from a scalar.
void accumulate(Tape& t, std::uint32_t id, bool was_scalar,
                const std::vector<double>& g, double factor_const = 1.0) {
  if (!t.requires_grad_of(id)) return;
  auto& dst = t.grad_of(id);
  if (was_scalar) {
    double s = 0.0;
    for (double x : g) s += x;
    dst[0] += s * factor_const;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor_const;
  }
}

template <typename Forward, typename Derivative>
Var unary(Var a, std::string_view op, Forward f, Derivative df) {
  Tape& t = a.tape();
  const auto& av = t.value_of(a.id());
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Var r = t.push(op, a.rows(), a.cols(), std::move(out), a.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id();
    const auto ir = r.id();
    t.set_backward(r, [ia, ir, df](Tape& tp) {
      const auto& x = tp.value_of(ia);
      const auto& y = tp.value_of(ir);
      const auto& gy = tp.grad_of(ir);
      auto& gx = tp.grad_of(ia);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += gy[i] * df(x[i], y[i]);
      }
    });
  }
  return r;
}

double softplus_value(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- elementwise ----------------------------------------------------------------

Var add(Var a, Var b) {
  const auto s = binary_shape(a, b, "add");
  Tape& t = a.tape();
  const auto& av = t.value_of(a.id());
  const auto& bv = t.value_of(b.id());
  const std::size_t n = static_cast<std::size_t>(s.rows) * s.cols;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[s.a_scalar ? 0 : i] + bv[s.b_scalar ? 0 : i];
  }
  Var r = t.push("add", s.rows, s.cols, std::move(out),
                 a.requires_grad() || b.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ib = b.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const auto& g = tp.grad_of(ir);
      accumulate(tp, ia, s.a_scalar, g);
      accumulate(tp, ib, s.b_scalar, g);
    });
  }
  return r;
}

Var sub(Var a, Var b) {
  const auto s = binary_shape(a, b, "sub");
  Tape& t = a.tape();
  const auto& av = t.value_of(a.id());
  const auto& bv = t.value_of(b.id());
  const std::size_t n = static_cast<std::size_t>(s.rows) * s.cols;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[s.a_scalar ? 0 : i] - bv[s.b_scalar ? 0 : i];
  }
  Var r = t.push("sub", s.rows, s.cols, std::move(out),
                 a.requires_grad() || b.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ib = b.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const auto& g = tp.grad_of(ir);
      accumulate(tp, ia, s.a_scalar, g);
      accumulate(tp, ib, s.b_scalar, g, -1.0);
    });
  }
  return r;
}

Var mul(Var a, Var b) {
  const auto s = binary_shape(a, b, "mul");
  Tape& t = a.tape();
  const auto& av = t.value_of(a.id());
  const auto& bv = t.value_of(b.id());
  const std::size_t n = static_cast<std::size_t>(s.rows) * s.cols;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = av[s.a_scalar ? 0 : i] * bv[s.b_scalar ? 0 : i];
  }
  Var r = t.push("mul", s.rows, s.cols, std::move(out),
                 a.requires_grad() || b.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ib = b.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const auto& g = tp.grad_of(ir);
      const auto& x = tp.value_of(ia);
      const auto& y = tp.value_of(ib);
      std::vector<double> ga(g.size()), gb(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] = g[i] * y[s.b_scalar ? 0 : i];
        gb[i] = g[i] * x[s.a_scalar ? 0 : i];
      }
      accumulate(tp, ia, s.a_scalar, ga);
      accumulate(tp, ib, s.b_scalar, gb);
    });
  }
  return r;
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  return unary(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, "log",
      [](double x) {
        return x > 0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
      },
      [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a) {
  return unary(a, "sigmoid", sigmoid_value,
               [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(Var a) {
  return unary(
      a, "log_sigmoid", [](double x) { return -softplus_value(-x); },
      [](double x, double) { return sigmoid_value(-x); });
}

Var softplus(Var a) {
  return unary(a, "softplus", softplus_value,
               [](double x, double) { return sigmoid_value(x); });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  // tanh approximation; smooth everywhere.
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double c = 0.044715;
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(k * (x + c * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var stop_gradient(Var a) {
  Tape& t = a.tape();
  std::vector<double> v;
  if (const auto* frozen = t.next_replayed_stop_gradient()) {
    if (frozen->size() != a.size()) {
      throw InvalidArgument("replayed stop_gradient has the wrong shape");
    }
    v = *frozen;
  } else {
    v = t.value_of(a.id());
    t.record_stop_gradient(v);
  }
  return t.push("stop_gradient", a.rows(), a.cols(), std::move(v), false);
}

Var sum(Var a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double x : t.value_of(a.id())) s += x;
  Var r = t.push("sum", 1, 1, {s}, a.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const double g = tp.grad_of(ir)[0];
      for (double& x : tp.grad_of(ia)) x += g;
    });
  }
  return r;
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var sum_all(std::span<const Var> terms) {
  if (terms.empty()) throw InvalidArgument("sum_all of an empty list");
  Tape& t = terms.front().tape();
  double s = 0.0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  ids.reserve(terms.size());
  for (const Var& v : terms) {
    if (&v.tape() != &t) throw InvalidArgument("sum_all across tapes");
    if (v.size() != 1) throw InvalidArgument("sum_all expects scalars");
    s += v.value();
    rg = rg || v.requires_grad();
    ids.push_back(v.id());
  }
  Var r = t.push("sum_all", 1, 1, {s}, rg);
  if (rg) {
    const auto ir = r.id();
    t.set_backward(r, [ids = std::move(ids), ir](Tape& tp) {
      const double g = tp.grad_of(ir)[0];
      for (auto id : ids) {
        if (tp.requires_grad_of(id)) tp.grad_of(id)[0] += g;
      }
    });
  }
  return r;
}

Var logsumexp(Var a) {
  Tape& t = a.tape();
  const auto& av = t.value_of(a.id());
  const double m = *std::max_element(av.begin(), av.end());
  double s = 0.0;
  for (double x : av) s += std::exp(x - m);
  Var r = t.push("logsumexp", 1, 1, {m + std::log(s)}, a.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const double g = tp.grad_of(ir)[0];
      const double lse = tp.value_of(ir)[0];
      const auto& x = tp.value_of(ia);
      auto& gx = tp.grad_of(ia);
      for (std::size_t i = 0; i < x.size(); ++i) {
        gx[i] += g * std::exp(x[i] - lse);
      }
    });
  }
  return r;
}

Var element(Var a, std::size_t i) {
  Tape& t = a.tape();
  if (i >= a.size()) throw InvalidArgument("element index out of range");
  Var r = t.push("element", 1, 1, {t.value_of(a.id())[i]}, a.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ir = r.id();
    t.set_backward(
        r, [=](Tape& tp) { tp.grad_of(ia)[i] += tp.grad_of(ir)[0]; });
  }
  return r;
}

// --- matrix ops -------------------------------------------------------------------

Var slice(Var flat, std::size_t offset, int rows, int cols) {
  Tape& t = flat.tape();
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const auto& src = t.value_of(flat.id());
  if (offset + n > src.size()) {
    throw InvalidArgument("slice exceeds the parameter vector");
  }
  std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(offset),
                          src.begin() + static_cast<std::ptrdiff_t>(offset + n));
  Var r = t.push("slice", rows, cols, std::move(out), flat.requires_grad());
  if (r.requires_grad()) {
    const auto ia = flat.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const auto& g = tp.grad_of(ir);
      auto& dst = tp.grad_of(ia);
      for (std::size_t i = 0; i < n; ++i) dst[offset + i] += g[i];
    });
  }
  return r;
}

Var first_rows(Var a, int n) {
  if (n > a.rows()) throw InvalidArgument("first_rows exceeds row count");
  return slice(a, 0, n, a.cols());
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) throw InvalidArgument("matmul shape mismatch");
  Tape& t = a.tape();
  const int m = a.rows(), k = a.cols(), n = b.cols();
  const auto& A = t.value_of(a.id());
  const auto& B = t.value_of(b.id());
  // Parallelism comes from the worker pool; BLAS stays single-threaded.
  static const bool single_threaded = (openblas_set_num_threads(1), true);
  (void)single_threaded;
  std::vector<double> C(static_cast<std::size_t>(m) * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, A.data(),
              k, B.data(), n, 0.0, C.data(), n);
  Var r = t.push("matmul", m, n, std::move(C),
                 a.requires_grad() || b.requires_grad());
  if (r.requires_grad()) {
    const auto ia = a.id(), ib = b.id(), ir = r.id();
    t.set_backward(r, [=](Tape& tp) {
      const auto& G = tp.grad_of(ir);
      if (tp.requires_grad_of(ia)) {
        // dA += G * B^T
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0,
                    G.data(), n, tp.value_of(ib).data(), n, 1.0,
                    tp.grad_of(ia).data(), k);
      }
      if (tp.requires_grad_of(ib)) {
        // dB += A^T * G
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0,
                    tp.value_of(ia).data(), k, G.data(), n, 1.0,
                    tp.grad_of(ib).data(), n);
      }
    });
  }
  return r;
}

Var rms_norm(Var x, Var gain, double eps) {
  check_same_tape(x, gain);
  if (gain.size() != static_cast<std::size_t>(x.cols())) {
    throw InvalidArgument("rms_norm gain width mismatch");
  }
  Tape& t = x.tape();
  const int rows = x.rows(), d = x.cols();
  const auto& X = t.value_of(x.id());
  const auto& G = t.value_of(gain.id());
  std::vector<double> Y(X.size());
  std::vector<double> inv(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xr = &X[static_cast<std::size_t>(r) * d];
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += xr[j] * xr[j];
    const double s = 1.0 / std::sqrt(ss / d + eps);
    inv[static_cast<std::size_t>(r)] = s;
    for (int j = 0; j < d; ++j) {
      Y[static_cast<std::size_t>(r) * d + j] = xr[j] * s * G[j];
    }
  }
  Var out = t.push("rms_norm", rows, d, std::move(Y),
                   x.requires_grad() || gain.requires_grad());
  if (out.requires_grad()) {
    const auto ix = x.id(), ig = gain.id(), io = out.id();
    t.set_backward(out, [=, inv = std::move(inv)](Tape& tp) {
      const auto& Xv = tp.value_of(ix);
      const auto& Gv = tp.value_of(ig);
      const auto& GO = tp.grad_of(io);
      const bool want_x = tp.requires_grad_of(ix);
      const bool want_g = tp.requires_grad_of(ig);
      for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * d;
        const double s = inv[static_cast<std::size_t>(r)];
        if (want_g) {
          auto& GG = tp.grad_of(ig);
          for (int j = 0; j < d; ++j) GG[j] += GO[base + j] * Xv[base + j] * s;
        }
        if (want_x) {
          // y_j = g_j x_j s;  dx_i = s g_i dy_i - x_i s^3/d * sum_j dy_j g_j x_j
          double dot = 0.0;
          for (int j = 0; j < d; ++j) dot += GO[base + j] * Gv[j] * Xv[base + j];
          const double c = s * s * s * dot / d;
          auto& GX = tp.grad_of(ix);
          for (int j = 0; j < d; ++j) {
            GX[base + j] += s * Gv[j] * GO[base + j] - Xv[base + j] * c;
          }
        }
      }
    });
  }
  return out;
}

Var embed(Var table, std::span<const int> ids) {
  Tape& t = table.tape();
  const int d = table.cols();
  const auto& W = t.value_of(table.id());
  std::vector<double> out(ids.size() * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw InvalidArgument("embedding index out of range");
    }
    std::copy_n(&W[static_cast<std::size_t>(ids[i]) * d], d, &out[i * d]);
  }
  Var r = t.push("embed", static_cast<int>(ids.size()), d, std::move(out),
                 table.requires_grad());
  if (r.requires_grad()) {
    const auto it = table.id(), ir = r.id();
    std::vector<int> rows(ids.begin(), ids.end());
    t.set_backward(r, [=, rows = std::move(rows)](Tape& tp) {
      const auto& g = tp.grad_of(ir);
      auto& gw = tp.grad_of(it);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        double* dst = &gw[static_cast<std::size_t>(rows[i]) * d];
        const double* src = &g[i * d];
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return r;
}

Var causal_attention(Var qkv, int heads) {
  Tape& t = qkv.tape();
  const int T = qkv.rows();
  if (qkv.cols() % 3 != 0) throw InvalidArgument("qkv width must be 3d");
  const int d = qkv.cols() / 3;
  if (heads <= 0 || d % heads != 0) {
    throw InvalidArgument("model width not divisible by heads");
  }
  const int hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto& X = t.value_of(qkv.id());
  const int stride = 3 * d;
  // probs[h][i][j] for j <= i, stored dense T x T per head.
  std::vector<double> probs(static_cast<std::size_t>(heads) * T * T, 0.0);
  std::vector<double> out(static_cast<std::size_t>(T) * d, 0.0);
  std::vector<double> scores(static_cast<std::size_t>(T));
  for (int h = 0; h < heads; ++h) {
    const int qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    for (int i = 0; i < T; ++i) {
      const double* q = &X[static_cast<std::size_t>(i) * stride + qo];
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j <= i; ++j) {
        const double* k = &X[static_cast<std::size_t>(j) * stride + ko];
        double s = 0.0;
        for (int c = 0; c < hd; ++c) s += q[c] * k[c];
        s *= inv_sqrt;
        scores[static_cast<std::size_t>(j)] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (int j = 0; j <= i; ++j) {
        scores[static_cast<std::size_t>(j)] =
            std::exp(scores[static_cast<std::size_t>(j)] - mx);
        z += scores[static_cast<std::size_t>(j)];
      }
      double* p = &probs[(static_cast<std::size_t>(h) * T + i) * T];
      double* o = &out[static_cast<std::size_t>(i) * d + h * hd];
      for (int j = 0; j <= i; ++j) {
        const double a = scores[static_cast<std::size_t>(j)] / z;
        p[j] = a;
        const double* v = &X[static_cast<std::size_t>(j) * stride + vo];
        for (int c = 0; c < hd; ++c) o[c] += a * v[c];
      }
    }
  }
  Var r = t.push("causal_attention", T, d, std::move(out),
                 qkv.requires_grad());
  if (r.requires_grad()) {
    const auto ix = qkv.id(), ir = r.id();
    t.set_backward(r, [=, probs = std::move(probs)](Tape& tp) {
      const auto& Xv = tp.value_of(ix);
      const auto& GO = tp.grad_of(ir);
      auto& GX = tp.grad_of(ix);
      std::vector<double> dp(static_cast<std::size_t>(T));
      for (int h = 0; h < heads; ++h) {
        const int qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
        for (int i = 0; i < T; ++i) {
          const double* p = &probs[(static_cast<std::size_t>(h) * T + i) * T];
          const double* go = &GO[static_cast<std::size_t>(i) * d + h * hd];
          double dot = 0.0;
          for (int j = 0; j <= i; ++j) {
            const double* v = &Xv[static_cast<std::size_t>(j) * stride + vo];
            double* gv = &GX[static_cast<std::size_t>(j) * stride + vo];
            double s = 0.0;
            for (int c = 0; c < hd; ++c) {
              s += go[c] * v[c];
              gv[c] += p[j] * go[c];
            }
            dp[static_cast<std::size_t>(j)] = s;
            dot += p[j] * s;
          }
          const double* q = &Xv[static_cast<std::size_t>(i) * stride + qo];
          double* gq = &GX[static_cast<std::size_t>(i) * stride + qo];
          for (int j = 0; j <= i; ++j) {
            const double ds =
                p[j] * (dp[static_cast<std::size_t>(j)] - dot) * inv_sqrt;
            if (ds == 0.0) continue;
            const double* k = &Xv[static_cast<std::size_t>(j) * stride + ko];
            double* gk = &GX[static_cast<std::size_t>(j) * stride + ko];
            for (int c = 0; c < hd; ++c) {
              gq[c] += ds * k[c];
              gk[c] += ds * q[c];
            }
          }
        }
      }
    });
  }
  return r;
}

Var log_softmax_pick(Var logits, std::span<const int> rows,
                     std::span<const int> targets) {
  if (rows.size() != targets.size()) {
    throw InvalidArgument("log_softmax_pick rows/targets length mismatch");
  }
  Tape& t = logits.tape();
  const int V = logits.cols();
  const auto& L = t.value_of(logits.id());
  const std::size_t n = rows.size();
  std::vector<double> out(n);
  std::vector<double> lse(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i] < 0 || rows[i] >= logits.rows() || targets[i] < 0 ||
        targets[i] >= V) {
      throw InvalidArgument("log_softmax_pick index out of range");
    }
    const double* l = &L[static_cast<std::size_t>(rows[i]) * V];
    const double m = *std::max_element(l, l + V);
    double z = 0.0;
    for (int j = 0; j < V; ++j) z += std::exp(l[j] - m);
    lse[i] = m + std::log(z);
    out[i] = l[targets[i]] - lse[i];
  }
  Var r = t.push("log_softmax_pick", static_cast<int>(n), 1, std::move(out),
                 logits.requires_grad());
  if (r.requires_grad()) {
    const auto il = logits.id(), ir = r.id();
    std::vector<int> rr(rows.begin(), rows.end());
    std::vector<int> tt(targets.begin(), targets.end());
    t.set_backward(r, [=, rr = std::move(rr), tt = std::move(tt),
                       lse = std::move(lse)](Tape& tp) {
      const auto& Lv = tp.value_of(il);
      const auto& g = tp.grad_of(ir);
      auto& gl = tp.grad_of(il);
      for (std::size_t i = 0; i < rr.size(); ++i) {
        if (g[i] == 0.0) continue;
        const std::size_t base = static_cast<std::size_t>(rr[i]) * V;
        for (int j = 0; j < V; ++j) {
          gl[base + j] -= g[i] * std::exp(Lv[base + j] - lse[i]);
        }
        gl[base + tt[i]] += g[i];
      }
    });
  }
  return r;
}

// --- ParamVector --------------------------------------------------------------------

ParamVector::ParamVector(std::vector<ParamSlice> layout)
    : layout_(std::move(layout)) {
  std::size_t offset = 0;
  for (auto& s : layout_) {
    if (s.rows <= 0 || s.cols <= 0) {
      throw InvalidArgument("parameter slice '" + s.name + "' has no extent");
    }
    s.offset = offset;
    offset += s.size();
  }
  values_.assign(offset, 0.0);
}

ParamVector ParamVector::flat(std::vector<double> values) {
  ParamVector p({ParamSlice{"x", 0, static_cast<int>(values.size()), 1}});
  p.values_ = std::move(values);
  return p;
}

const ParamSlice& ParamVector::slice(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw InvalidArgument("unknown parameter slice '" + std::string(name) + "'");
}

std::span<double> ParamVector::view(std::string_view name) {
  const auto& s = slice(name);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::view(std::string_view name) const {
  const auto& s = slice(name);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

void ParamVector::validate() const {
  std::size_t expected = 0;
  for (const auto& s : layout_) {
    if (s.offset != expected) {
      throw InvalidArgument("parameter layout has a gap or overlap at '" +
                            s.name + "'");
    }
    expected += s.size();
  }
  if (expected != values_.size()) {
    throw InvalidArgument("parameter layout does not cover the vector");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError("non-finite parameter at index " + std::to_string(i));
    }
  }
}

// --- evaluate / gradient / check -----------------------------------------------------

namespace {

Var run_expr(const ScalarExpr& expr, Tape& tape, const ParamVector& params,
             bool requires_grad) {
  std::vector<double> v(params.values().begin(), params.values().end());
  Var leaf =
      tape.leaf(std::move(v), static_cast<int>(params.size()), 1, requires_grad);
  Var out = expr(tape, leaf);
  if (!out.valid() || out.size() != 1) {
    throw InvalidArgument("scalar expression did not produce a 1x1 node");
  }
  return out;
}

double evaluate_with(const ScalarExpr& expr, const ParamVector& params,
                     const FrozenDecisions* replay) {
  Tape tape;
  if (replay) tape.replay_from(replay);
  return run_expr(expr, tape, params, false).value();
}

}  // namespace

double evaluate(const ScalarExpr& expr, const ParamVector& params) {
  return evaluate_with(expr, params, nullptr);
}

ParamVector gradient(const ScalarExpr& expr, const ParamVector& params) {
  Tape tape;
  Var out = run_expr(expr, tape, params, true);
  tape.backward(out);
  ParamVector g = params;
  // The parameter leaf is always node 0.
  const auto& src = tape.grad_of(0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(src[i])) {
      throw NumericError("non-finite gradient entry at index " +
                         std::to_string(i));
    }
    g[i] = src[i];
  }
  return g;
}

GradCheckReport finite_diff_check(const ScalarExpr& expr,
                                  const ParamVector& params, double h,
                                  const GradCheckOptions& options) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_check requires h > 0");
  FrozenDecisions frozen;
  ParamVector analytic;
  {
    Tape tape;
    tape.record_into(&frozen);
    Var out = run_expr(expr, tape, params, true);
    tape.backward(out);
    analytic = params;
    const auto& src = tape.grad_of(0);
    std::copy(src.begin(), src.end(), analytic.values().begin());
  }
  const bool has_frozen =
      !frozen.stop_gradient_values.empty() || !frozen.indicators.empty();

  std::vector<std::size_t> indices = options.indices;
  if (indices.empty()) {
    indices.resize(params.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  }

  auto within = [&](double a, double fd) {
    return std::abs(a - fd) <= options.rel_tol * std::max(1.0, std::abs(fd));
  };

  GradCheckReport report;
  ParamVector probe = params;
  for (std::size_t idx : indices) {
    if (idx >= params.size()) {
      throw InvalidArgument("finite_diff_check index out of range");
    }
    const double x0 = params[idx];
    GradCheckEntry e;
    e.index = idx;
    e.analytic = analytic[idx];
    probe[idx] = x0 + h;
    const double fp = evaluate_with(expr, probe, nullptr);
    const double fp_frozen = has_frozen ? evaluate_with(expr, probe, &frozen) : fp;
    probe[idx] = x0 - h;
    const double fm = evaluate_with(expr, probe, nullptr);
    const double fm_frozen = has_frozen ? evaluate_with(expr, probe, &frozen) : fm;
    probe[idx] = x0;
    e.fd_live = (fp - fm) / (2.0 * h);
    e.fd_frozen = (fp_frozen - fm_frozen) / (2.0 * h);

    const double err =
        std::abs(e.analytic - e.fd_frozen) / std::max(1.0, std::abs(e.fd_frozen));
    report.max_error = std::max(report.max_error, err);
    if (!within(e.analytic, e.fd_frozen)) {
      e.status = EntryStatus::kFail;
      ++report.failed;
    } else if (!within(e.analytic, e.fd_live)) {
      e.status = EntryStatus::kSgBlocked;
      ++report.sg_blocked;
    } else {
      e.status = EntryStatus::kPass;
      ++report.passed;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace scir::grad
