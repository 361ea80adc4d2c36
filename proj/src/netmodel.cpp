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

#include "pgl/netmodel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace pgl {

void ModelConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
  if (backbone_dims.empty()) throw std::invalid_argument("model: backbone_dims is empty");
  for (auto w : backbone_dims) {
    if (w == 0) throw std::invalid_argument("model: backbone widths must be positive");
  }
  if (gnn_depth < 1) throw std::invalid_argument("model: gnn_depth must be >= 1");
  if (edge_hidden_width == 0 || discriminator_hidden_width == 0) {
    throw std::invalid_argument("model: hidden widths must be positive");
  }
  if (num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model: dropout in [0, 1)");
}

Linear Linear::glorot(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& x : w) x = rng.uniform(-bound, bound);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::zeros({1, out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

Model::Model(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed, "init");
  std::size_t in = config_.input_dim;
  for (auto w : config_.backbone_dims) {
    backbone_.push_back(Linear::glorot(in, w, rng));
    in = w;
  }
  const std::size_t width = config_.node_width();
  for (std::size_t l = 0; l < config_.gnn_depth; ++l) {
    edge_.push_back({Linear::glorot(width, config_.edge_hidden_width, rng),
                     Linear::glorot(config_.edge_hidden_width, 1, rng)});
    node_.push_back({Linear::glorot(2 * width, width, rng), Linear::glorot(width, width, rng)});
  }
  classifier_ = Linear::glorot(width, static_cast<std::size_t>(config_.num_classes), rng);
  discriminator_ = {Linear::glorot(width, config_.discriminator_hidden_width, rng),
                    Linear::glorot(config_.discriminator_hidden_width, 1, rng)};
}

Tensor Model::backbone_forward(const Tensor& x, bool training, Rng& rng) const {
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw std::invalid_argument("backbone: expected " + std::to_string(config_.input_dim) +
                                " input columns, got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t k = 0; k < backbone_.size(); ++k) {
    h = backbone_[k](h);
    if (k + 1 < backbone_.size()) {
      h = leaky_relu(h, config_.leaky_slope);
      h = dropout(h, config_.dropout, training, rng);
    }
  }
  return h;
}

EdgeMaps Model::edge_update(std::size_t layer, const Tensor& v) const {
  if (layer < 1 || layer > edge_.size()) throw std::out_of_range("edge_update: bad layer index");
  if (v.rank() != 2 || v.rows() == 0) throw std::invalid_argument("edge_update: empty node matrix");
  for (double x : v.values()) {
    if (!std::isfinite(x)) throw NonFiniteError("edge_update: non-finite node features");
  }
  const auto& net = edge_[layer - 1];
  const std::size_t n = v.rows();
  Tensor h = leaky_relu(net[0](pairwise_abs_diff(v)), config_.leaky_slope);
  Tensor a = sigmoid(reshape(net[1](h), n, n));
  Tensor with_loops = add(a, Tensor::identity(n));
  Tensor inv_sqrt_deg = pow_scalar(row_sums(with_loops), -0.5);
  Tensor e = mul(mul(with_loops, inv_sqrt_deg), transpose(inv_sqrt_deg));
  return {a, e};
}

Tensor Model::node_update(std::size_t layer, const Tensor& v, const Tensor& e, bool training,
                          Rng& rng) const {
  if (layer < 1 || layer > node_.size()) throw std::out_of_range("node_update: bad layer index");
  if (e.rows() != v.rows() || e.cols() != v.rows()) {
    throw std::invalid_argument("node_update: edge matrix " + shape_string(e.shape()) +
                                " does not match nodes " + shape_string(v.shape()));
  }
  const auto& net = node_[layer - 1];
  Tensor h = concat_cols(v, matmul(e, v));
  h = leaky_relu(net[0](h), config_.leaky_slope);
  h = dropout(h, config_.dropout, training, rng);
  return leaky_relu(net[1](h), config_.leaky_slope);
}

Tensor Model::classify_logits(const Tensor& v) const { return classifier_(v); }

Tensor Model::classify(const Tensor& v) const { return softmax_rows(classify_logits(v)); }

Tensor Model::discriminate(const Tensor& v0, double reversal_coefficient) const {
  Tensor h = gradient_reversal(v0, reversal_coefficient);
  h = leaky_relu(discriminator_[0](h), config_.leaky_slope);
  return sigmoid(discriminator_[1](h));
}

GraphOutput Model::forward(const Tensor& x, bool training, Rng& rng) const {
  GraphOutput out;
  out.nodes.push_back(backbone_forward(x, training, rng));
  if (!config_.use_gnn) {
    out.probs.push_back(classify(out.nodes.back()));
    return out;
  }
  for (std::size_t l = 1; l <= config_.gnn_depth; ++l) {
    const Tensor& prev = out.nodes.back();
    EdgeMaps maps = edge_update(l, prev);
    Tensor next = node_update(l, prev, maps.normalized, training, rng);
    out.affinities.push_back(maps.affinity);
    out.edges.push_back(maps.normalized);
    out.probs.push_back(classify(next));
    out.nodes.push_back(std::move(next));
  }
  return out;
}

namespace {

void append(std::vector<NamedParameter>& out, const std::string& prefix, const Linear& lin) {
  out.push_back({prefix + ".weight", lin.weight});
  out.push_back({prefix + ".bias", lin.bias});
}

}  // namespace

std::vector<NamedParameter> Model::backbone_parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t k = 0; k < backbone_.size(); ++k) {
    append(out, "backbone." + std::to_string(k), backbone_[k]);
  }
  return out;
}

std::vector<NamedParameter> Model::head_parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t l = 0; config_.use_gnn && l < edge_.size(); ++l) {
    const auto tag = std::to_string(l + 1);
    append(out, "edge." + tag + ".hidden", edge_[l][0]);
    append(out, "edge." + tag + ".out", edge_[l][1]);
    append(out, "node." + tag + ".hidden", node_[l][0]);
    append(out, "node." + tag + ".out", node_[l][1]);
  }
  append(out, "classifier", classifier_);
  append(out, "discriminator.hidden", discriminator_[0]);
  append(out, "discriminator.out", discriminator_[1]);
  return out;
}

std::vector<NamedParameter> Model::parameters() const {
  auto out = backbone_parameters();
  auto head = head_parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

Tensor features_tensor(const std::vector<const std::vector<double>*>& rows) {
  if (rows.empty()) throw std::invalid_argument("features_tensor: no rows");
  const std::size_t d = rows.front()->size();
  std::vector<double> v;
  v.reserve(rows.size() * d);
  for (const auto* r : rows) {
    if (r->size() != d) throw std::invalid_argument("features_tensor: ragged rows");
    v.insert(v.end(), r->begin(), r->end());
  }
  return Tensor::from({rows.size(), d}, std::move(v));
}

void write_matrix_csv(std::ostream& out, const Tensor& m) {
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace pgl
