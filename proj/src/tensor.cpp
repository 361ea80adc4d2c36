/*
 * Copyright 2026 The PGL Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pgl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "pgl/rng.hpp"

namespace pgl {

namespace {

std::atomic<std::uint64_t> next_seq{1};
thread_local bool grad_mode_enabled = true;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_string(a) + " vs " +
                              shape_string(b));
}

void require_matrix(const std::string& op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(op + ": undefined tensor");
  if (t.rank() != 2) {
    throw std::invalid_argument(op + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
  }
}

std::vector<double>& grad_of(const std::shared_ptr<detail::Node>& n) {
  n->ensure_grad();
  return n->grad;
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const std::string& op, const Tensor& a, Fwd fwd, Deriv deriv) {
  require_matrix(op, a);
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(op, a.shape(), std::move(out), {a}, [deriv](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& g = grad_of(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      g[i] += self.grad[i] * deriv(x->values[i], self.values[i]);
    }
  });
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;
  std::size_t ai(std::size_t i, std::size_t j) const {
    return (ar == 1 ? 0 : i) * ac + (ac == 1 ? 0 : j);
  }
  std::size_t bi(std::size_t i, std::size_t j) const {
    return (br == 1 ? 0 : i) * bc + (bc == 1 ? 0 : j);
  }
};

Broadcast broadcast(const std::string& op, const Tensor& a, const Tensor& b) {
  require_matrix(op, a);
  require_matrix(op, b);
  Broadcast bc{0, 0, a.rows(), a.cols(), b.rows(), b.cols()};
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_error(op, a.shape(), b.shape());
  };
  bc.rows = dim(bc.ar, bc.br);
  bc.cols = dim(bc.ac, bc.bc);
  return bc;
}

// Binary elementwise op; da/db give partial derivatives at (x, y).
template <typename Fwd, typename Da, typename Db>
Tensor binary(const std::string& op, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  const Broadcast bc = broadcast(op, a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(bc.rows * bc.cols);
  for (std::size_t i = 0; i < bc.rows; ++i) {
    for (std::size_t j = 0; j < bc.cols; ++j) {
      out[i * bc.cols + j] = fwd(av[bc.ai(i, j)], bv[bc.bi(i, j)]);
    }
  }
  return make_result(op, {bc.rows, bc.cols}, std::move(out), {a, b},
                     [bc, da, db](detail::Node& self) {
                       auto& x = self.inputs[0];
                       auto& y = self.inputs[1];
                       std::vector<double>* gx = x->requires_grad ? &grad_of(x) : nullptr;
                       std::vector<double>* gy = y->requires_grad ? &grad_of(y) : nullptr;
                       for (std::size_t i = 0; i < bc.rows; ++i) {
                         for (std::size_t j = 0; j < bc.cols; ++j) {
                           const double g = self.grad[i * bc.cols + j];
                           const double xv = x->values[bc.ai(i, j)];
                           const double yv = y->values[bc.bi(i, j)];
                           if (gx) (*gx)[bc.ai(i, j)] += g * da(xv, yv);
                           if (gy) (*gy)[bc.bi(i, j)] += g * db(xv, yv);
                         }
                       }
                     });
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw std::invalid_argument("tensor: empty shape");
  for (auto d : shape) {
    if (d == 0) throw std::invalid_argument("tensor: zero dimension in " + shape_string(shape));
  }
  if (product(shape) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_string(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = next_seq++;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = product(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = product(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return from({1, 1}, {value}); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::rows() const { return node_->shape.empty() ? 0 : node_->shape[0]; }

std::size_t Tensor::cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }

std::size_t Tensor::size() const { return node_->values.size(); }

std::span<const double> Tensor::values() const { return node_->values; }

std::span<double> Tensor::mutable_values() { return node_->values; }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item: tensor " + shape_string(shape()) + " is not a scalar");
  }
  return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->values[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::has_grad() const { return node_->grad.size() == node_->values.size(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

void Tensor::clear_grad() { node_->grad.clear(); }

const std::string& Tensor::op() const { return node_->op; }

std::uint64_t Tensor::seq() const { return node_->seq; }

Tensor Tensor::detach() const { return from(shape(), node_->values, false); }

Tensor make_result(const std::string& op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->seq = next_seq++;
  node->op = op;
  const bool track =
      grad_mode_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool GradMode::enabled() { return grad_mode_enabled; }

void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_mode_enabled) { grad_mode_enabled = false; }

NoGradGuard::~NoGradGuard() { grad_mode_enabled = previous_; }

// ---------------------------------------------------------------------------
// Tape and backward

namespace {

std::vector<detail::Node*> collect(const Tensor& loss) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& in : n->inputs) stack.push_back(in.get());
  }
  // Creation order is a topological order: inputs always exist before outputs.
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq < b->seq; });
  return order;
}

}  // namespace

std::vector<TapeEntry> build_tape(const Tensor& loss) {
  std::vector<TapeEntry> tape;
  for (auto* n : collect(loss)) {
    if (!n->backward) continue;
    TapeEntry e{n->op, n->seq, {}};
    for (auto& in : n->inputs) e.input_seqs.push_back(in->seq);
    tape.push_back(std::move(e));
  }
  return tape;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  auto order = collect(loss);
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->values.size(), 0.0);
  }
  loss.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](detail::Node& self) {
    auto& x = self.inputs[0];
    auto& y = self.inputs[1];
    const auto& g = self.grad;
    if (x->requires_grad) {
      auto& gx = grad_of(x);
      // dA = G * B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * y->values[p * m + j];
          gx[i * k + p] += acc;
        }
      }
    }
    if (y->requires_grad) {
      auto& gy = grad_of(y);
      // dB = A^T * G
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = x->values[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gy[p * m + j] += aip * g[i * m + j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor neg(const Tensor& a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      "add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor pow_scalar(const Tensor& a, double exponent) {
  if (exponent == 0.0) {
    return unary("pow", a, [](double) { return 1.0; }, [](double, double) { return 0.0; });
  }
  return unary(
      "pow", a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix("softmax", a);
  const std::size_t n = a.rows(), c = a.cols();
  auto in = a.values();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = in.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return make_result("softmax", {n, c}, std::move(out), {a}, [n, c](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.values[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += self.values[i * c + j] * (self.grad[i * c + j] - dot);
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  require_matrix("log_softmax", a);
  const std::size_t n = a.rows(), c = a.cols();
  auto in = a.values();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = in.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lz;
  }
  return make_result("log_softmax", {n, c}, std::move(out), {a}, [n, c](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < c; ++j) gsum += self.grad[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += self.grad[i * c + j] - std::exp(self.values[i * c + j]) * gsum;
      }
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_matrix("concat", a);
  require_matrix("concat", b);
  if (a.rows() != b.rows()) shape_error("concat", a.shape(), b.shape());
  const std::size_t n = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(n * c);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
  }
  return make_result("concat", {n, c}, std::move(out), {a, b}, [n, ca, cb, c](detail::Node& self) {
    auto& x = self.inputs[0];
    auto& y = self.inputs[1];
    if (x->requires_grad) {
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ca; ++j) gx[i * ca + j] += self.grad[i * c + j];
    }
    if (y->requires_grad) {
      auto& gy = grad_of(y);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cb; ++j) gy[i * cb + j] += self.grad[i * c + ca + j];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t n = a.rows(), m = a.cols();
  auto in = a.values();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = in[i * m + j];
  return make_result("transpose", {m, n}, std::move(out), {a}, [n, m](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += self.grad[j * n + i];
  });
}

Tensor sum(const Tensor& a) {
  require_matrix("sum", a);
  auto in = a.values();
  const double s = std::accumulate(in.begin(), in.end(), 0.0);
  return make_result("sum", {1, 1}, {s}, {a}, [](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (auto& g : gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require_matrix("mean", a);
  auto in = a.values();
  const double inv = 1.0 / static_cast<double>(in.size());
  const double s = std::accumulate(in.begin(), in.end(), 0.0) * inv;
  return make_result("mean", {1, 1}, {s}, {a}, [inv](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (auto& g : gx) g += self.grad[0] * inv;
  });
}

Tensor row_sums(const Tensor& a) {
  require_matrix("row_sums", a);
  const std::size_t n = a.rows(), m = a.cols();
  auto in = a.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += in[i * m + j];
  return make_result("row_sums", {n, 1}, std::move(out), {a}, [n, m](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_matrix("gather_rows", a);
  const std::size_t m = a.cols();
  if (rows.empty()) throw std::invalid_argument("gather_rows: empty row list");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  auto in = a.values();
  std::vector<double> out(idx.size() * m);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= a.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(idx[k]) + " out of " +
                              shape_string(a.shape()));
    }
    std::copy_n(in.data() + idx[k] * m, m, out.data() + k * m);
  }
  return make_result("gather_rows", {idx.size(), m}, std::move(out), {a},
                     [idx, m](detail::Node& self) {
                       auto& x = self.inputs[0];
                       if (!x->requires_grad) return;
                       auto& gx = grad_of(x);
                       for (std::size_t k = 0; k < idx.size(); ++k)
                         for (std::size_t j = 0; j < m; ++j)
                           gx[idx[k] * m + j] += self.grad[k * m + j];
                     });
}

Tensor pick(const Tensor& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  require_matrix("pick", a);
  if (rows.size() != cols.size() || rows.empty()) {
    throw std::invalid_argument("pick: row/col index lists must be nonempty and equal length");
  }
  const std::size_t m = a.cols();
  std::vector<std::size_t> flat(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= a.rows() || cols[k] >= m) {
      throw std::out_of_range("pick: index out of " + shape_string(a.shape()));
    }
    flat[k] = rows[k] * m + cols[k];
  }
  auto in = a.values();
  std::vector<double> out(flat.size());
  for (std::size_t k = 0; k < flat.size(); ++k) out[k] = in[flat[k]];
  return make_result("pick", {flat.size(), 1}, std::move(out), {a}, [flat](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t k = 0; k < flat.size(); ++k) gx[flat[k]] += self.grad[k];
  });
}

Tensor pairwise_abs_diff(const Tensor& v) {
  require_matrix("pairwise_abs_diff", v);
  const std::size_t n = v.rows(), w = v.cols();
  auto in = v.values();
  std::vector<double> out(n * n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < w; ++k)
        out[(i * n + j) * w + k] = std::abs(in[i * w + k] - in[j * w + k]);
  return make_result("pairwise_abs_diff", {n * n, w}, std::move(out), {v},
                     [n, w](detail::Node& self) {
                       auto& x = self.inputs[0];
                       if (!x->requires_grad) return;
                       auto& gx = grad_of(x);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           for (std::size_t k = 0; k < w; ++k) {
                             const double d = x->values[i * w + k] - x->values[j * w + k];
                             const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                             const double g = self.grad[(i * n + j) * w + k] * s;
                             gx[i * w + k] += g;
                             gx[j * w + k] -= g;
                           }
                     });
}

Tensor pairwise_l2(const Tensor& v) {
  require_matrix("pairwise_l2", v);
  const std::size_t n = v.rows(), w = v.cols();
  auto in = v.values();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        const double d = in[i * w + k] - in[j * w + k];
        s += d * d;
      }
      out[i * n + j] = std::sqrt(s);
    }
  return make_result("pairwise_l2", {n, n}, std::move(out), {v}, [n, w](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double dist = self.values[i * n + j];
        if (dist == 0.0) continue;
        const double g = self.grad[i * n + j] / dist;
        for (std::size_t k = 0; k < w; ++k) {
          const double d = x->values[i * w + k] - x->values[j * w + k];
          gx[i * w + k] += g * d;
          gx[j * w + k] -= g * d;
        }
      }
  });
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size()) shape_error("reshape", a.shape(), {rows, cols});
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result("reshape", {rows, cols}, std::move(out), {a}, [](detail::Node& self) {
    auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    auto& gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
  require_matrix("dropout", a);
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return make_result("dropout", a.shape(), std::move(out), {a},
                     [mask = std::move(mask)](detail::Node& self) {
                       auto& x = self.inputs[0];
                       if (!x->requires_grad) return;
                       auto& gx = grad_of(x);
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * mask[i];
                     });
}

Tensor gradient_reversal(const Tensor& x, double coefficient) {
  require_matrix("gradient_reversal", x);
  if (coefficient < 0.0) {
    throw std::invalid_argument("gradient_reversal: coefficient must be >= 0, got " +
                                std::to_string(coefficient));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("gradient_reversal", x.shape(), std::move(out), {x},
                     [coefficient](detail::Node& self) {
                       auto& in = self.inputs[0];
                       if (!in->requires_grad) return;
                       auto& g = grad_of(in);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += -coefficient * self.grad[i];
                     });
}

}  // namespace pgl
