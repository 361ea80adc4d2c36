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

// Training losses: focal node classification, edge binary cross-entropy and
// the domain-adversarial term, combined as L_n + mu L_e + gamma L_d.
//
// The backbone sees the adversarial term with the opposite sign because the
// discriminator input passes through gradient_reversal (coefficient 1), so a
// single backward pass yields both parameter-group updates.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgl/synthgen.hpp"
#include "pgl/tensor.hpp"

namespace pgl {

inline constexpr double kLogClamp = 1e-7;

struct LossWeights {
  double mu = 0.3;
  double gamma = 0.4;
  double rho = 2.0;

  void validate() const;
};

// Mean over labeled rows of -(1 - p_y)^rho log p_y, summed over layers.
// `labels` are 1-based and must not exceed the number of classes.
Tensor focal_node_loss(const std::vector<Tensor>& layer_probs, std::span<const std::size_t> rows,
                       std::span<const Label> labels, double rho);

// Same-class indicator matrix for the given labels.
std::vector<double> edge_targets(std::span<const Label> labels);

// Mean binary cross-entropy between E restricted to the labeled rows/cols and
// the same-class indicator, summed over layers.
Tensor edge_loss(const std::vector<Tensor>& layer_edges, std::span<const std::size_t> rows,
                 std::span<const Label> labels);

struct AdversarialTerm {
  Tensor value;
  std::size_t clamped = 0;  // discriminator outputs moved into [1e-7, 1 - 1e-7]
};

// E_s log D + E_t log(1 - D) over discriminator outputs for source-domain and
// target-domain nodes.
AdversarialTerm adversarial_loss(const Tensor& source_prob, const Tensor& target_prob);

struct LossParts {
  Tensor node;
  Tensor edge;         // may be undefined (no GNN)
  Tensor adversarial;  // may be undefined
};

Tensor total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace pgl
