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

#include "pgl/objective.hpp"

#include <stdexcept>
#include <string>

namespace pgl {

namespace {

// Keeps log() finite when a softmax probability underflows.
constexpr double kProbFloor = 1e-300;

}  // namespace

void LossWeights::validate() const {
  if (mu < 0.0 || gamma < 0.0 || rho < 0.0) {
    throw std::invalid_argument("loss weights: mu, gamma and rho must be >= 0");
  }
}

Tensor focal_node_loss(const std::vector<Tensor>& layer_probs, std::span<const std::size_t> rows,
                       std::span<const Label> labels, double rho) {
  if (layer_probs.empty()) throw std::invalid_argument("focal_node_loss: no layers");
  if (rows.size() != labels.size() || rows.empty()) {
    throw std::invalid_argument("focal_node_loss: need one label per labeled row");
  }
  const auto classes = static_cast<Label>(layer_probs.front().cols());
  std::vector<std::size_t> cols(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] < 1 || labels[k] > classes) {
      throw std::invalid_argument("focal_node_loss: label " + std::to_string(labels[k]) +
                                  " outside known classes 1.." + std::to_string(classes));
    }
    cols[k] = static_cast<std::size_t>(labels[k] - 1);
  }
  Tensor total;
  for (const auto& probs : layer_probs) {
    Tensor p = clamp(pick(probs, rows, cols), kProbFloor, 1.0);
    Tensor weight = pow_scalar(add_scalar(neg(p), 1.0), rho);
    Tensor layer = neg(mean(mul(weight, log(p))));
    total = total.defined() ? add(total, layer) : layer;
  }
  return total;
}

std::vector<double> edge_targets(std::span<const Label> labels) {
  const std::size_t n = labels.size();
  std::vector<double> y(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = labels[i] == labels[j] ? 1.0 : 0.0;
  return y;
}

Tensor edge_loss(const std::vector<Tensor>& layer_edges, std::span<const std::size_t> rows,
                 std::span<const Label> labels) {
  if (layer_edges.empty()) throw std::invalid_argument("edge_loss: no layers");
  if (rows.size() != labels.size() || rows.empty()) {
    throw std::invalid_argument("edge_loss: need one label per labeled row");
  }
  const std::size_t k = rows.size();
  Tensor target = Tensor::from({k, k}, edge_targets(labels));
  Tensor complement = add_scalar(neg(target), 1.0);
  Tensor total;
  for (const auto& e : layer_edges) {
    if (e.rows() != e.cols()) {
      throw std::invalid_argument("edge_loss: edge matrix " + shape_string(e.shape()) +
                                  " is not square");
    }
    Tensor sub_block = transpose(gather_rows(transpose(gather_rows(e, rows)), rows));
    Tensor pos = log(clamp(sub_block, kLogClamp, 1.0 - kLogClamp));
    Tensor negv = log(clamp(add_scalar(neg(sub_block), 1.0), kLogClamp, 1.0 - kLogClamp));
    Tensor bce = neg(mean(add(mul(target, pos), mul(complement, negv))));
    total = total.defined() ? add(total, bce) : bce;
  }
  return total;
}

AdversarialTerm adversarial_loss(const Tensor& source_prob, const Tensor& target_prob) {
  if (!source_prob.defined() || !target_prob.defined() || source_prob.size() == 0 ||
      target_prob.size() == 0) {
    throw std::invalid_argument("adversarial_loss: both domains need at least one node");
  }
  AdversarialTerm term;
  auto count = [&](const Tensor& t, bool complement) {
    for (double x : t.values()) {
      const double v = complement ? 1.0 - x : x;
      if (v < kLogClamp || v > 1.0 - kLogClamp) ++term.clamped;
    }
  };
  count(source_prob, false);
  count(target_prob, true);
  Tensor s = mean(log(clamp(source_prob, kLogClamp, 1.0 - kLogClamp)));
  Tensor t = mean(log(clamp(add_scalar(neg(target_prob), 1.0), kLogClamp, 1.0 - kLogClamp)));
  term.value = add(s, t);
  return term;
}

Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  if (!parts.node.defined()) throw std::invalid_argument("total_loss: node loss is required");
  Tensor total = parts.node;
  if (parts.edge.defined() && weights.mu != 0.0) total = add(total, scale(parts.edge, weights.mu));
  if (parts.adversarial.defined() && weights.gamma != 0.0) {
    total = add(total, scale(parts.adversarial, weights.gamma));
  }
  return total;
}

}  // namespace pgl
