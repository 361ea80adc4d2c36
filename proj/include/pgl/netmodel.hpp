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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pgl/optim.hpp"
#include "pgl/rng.hpp"
#include "pgl/tensor.hpp"

namespace pgl {

struct ModelConfig {
  std::size_t input_dim = 16;
  // Widths after the input layer; the last entry is the node feature width.
  std::vector<std::size_t> backbone_dims{64, 64};
  std::size_t gnn_depth = 1;
  std::size_t edge_hidden_width = 64;
  std::size_t discriminator_hidden_width = 64;
  int num_classes = 4;
  double dropout = 0.2;
  double leaky_slope = 0.01;
  // False routes classification straight off the backbone features.
  bool use_gnn = true;

  std::size_t node_width() const { return backbone_dims.back(); }
  void validate() const;
};

// Affine map y = x W + b.
struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  static Linear glorot(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct EdgeMaps {
  Tensor affinity;    // A: sigmoid of the edge network, N x N
  Tensor normalized;  // E = D^-1/2 (A + I) D^-1/2
};

struct GraphOutput {
  std::vector<Tensor> nodes;       // V^(0..L)
  std::vector<Tensor> affinities;  // A^(1..L)
  std::vector<Tensor> edges;       // E^(1..L)
  std::vector<Tensor> probs;       // F(V^(l)) for l = 1..L, or F(V^(0)) without a GNN
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  Tensor backbone_forward(const Tensor& x, bool training, Rng& rng) const;
  // Layer index is 1-based.
  EdgeMaps edge_update(std::size_t layer, const Tensor& v) const;
  Tensor node_update(std::size_t layer, const Tensor& v, const Tensor& e, bool training,
                     Rng& rng) const;
  Tensor classify_logits(const Tensor& v) const;
  Tensor classify(const Tensor& v) const;
  // Probability of "source" per row, N x 1. The features pass through a
  // gradient reversal layer with the given coefficient first.
  Tensor discriminate(const Tensor& v0, double reversal_coefficient) const;

  // Full forward over one graph: every row of x is a node.
  GraphOutput forward(const Tensor& x, bool training, Rng& rng) const;

  std::vector<NamedParameter> backbone_parameters() const;
  // GNN, classifier and discriminator parameters.
  std::vector<NamedParameter> head_parameters() const;
  std::vector<NamedParameter> parameters() const;

  // Mutable access for tests that pin weights.
  std::vector<Linear>& backbone_layers() { return backbone_; }
  std::vector<Linear>& edge_layers(std::size_t layer) { return edge_.at(layer - 1); }
  std::vector<Linear>& node_layers(std::size_t layer) { return node_.at(layer - 1); }
  Linear& classifier() { return classifier_; }
  std::vector<Linear>& discriminator_layers() { return discriminator_; }

 private:
  ModelConfig config_;
  std::vector<Linear> backbone_;
  std::vector<std::vector<Linear>> edge_;  // per layer: [hidden, out]
  std::vector<std::vector<Linear>> node_;  // per layer: [hidden, out]
  Linear classifier_;
  std::vector<Linear> discriminator_;
};

// Rows of a sample matrix as a tensor.
Tensor features_tensor(const std::vector<const std::vector<double>*>& rows);

void write_matrix_csv(std::ostream& out, const Tensor& m);

}  // namespace pgl
