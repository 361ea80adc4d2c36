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

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every Tensor is a handle to a node in a dynamically built graph. Operations
// on tensors that require gradients record their inputs and a gradient rule;
// backward() replays the recorded operations in reverse creation order.
//
// Tape policy: the recorded graph lives as long as any handle to its output
// does. backward() resets the gradients of intermediate nodes before running,
// so calling it twice on the same loss accumulates twice into leaves only.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgl {

class Rng;

using Shape = std::vector<std::size_t>;

// Raised when a computation meets NaN or infinity where finite values are required.
class NonFiniteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;

  std::span<const double> values() const;
  // Direct buffer access for initializers and optimizers. Never call on a
  // tensor that is an input of a live graph you still intend to backprop.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  const std::string& op() const;
  std::uint64_t seq() const;

  // Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(const std::string& op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
};

// Builds an op output; records history only when an input requires gradients
// and gradient recording is enabled.
Tensor make_result(const std::string& op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);

class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// One recorded primitive, as seen by backward.
struct TapeEntry {
  std::string op;
  std::uint64_t seq;
  std::vector<std::uint64_t> input_seqs;
};

// Recorded operations reachable from `loss`, in creation order.
std::vector<TapeEntry> build_tape(const Tensor& loss);

void backward(const Tensor& loss);

// Primitives. All operate on rank-2 tensors; a scalar is 1x1.
Tensor matmul(const Tensor& a, const Tensor& b);
// Binary elementwise ops broadcast any dimension of size 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor pow_scalar(const Tensor& a, double exponent);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sums(const Tensor& a);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
// out[k] = a(rows[k], cols[k]) as a column vector.
Tensor pick(const Tensor& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
// Row-major N*N x w matrix of |v_i - v_j| for all ordered pairs (i, j).
Tensor pairwise_abs_diff(const Tensor& v);
// N x N matrix of ||v_i - v_j||_2.
Tensor pairwise_l2(const Tensor& v);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);
// Inverted dropout; identity when `training` is false.
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);
// Identity forward; backward multiplies the upstream gradient by -coefficient.
Tensor gradient_reversal(const Tensor& x, double coefficient);

}  // namespace pgl
