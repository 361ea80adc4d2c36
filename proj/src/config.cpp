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

#include "pgl/config.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pgl/rng.hpp"

namespace pgl {

using nlohmann::json;

void RunConfig::validate() const {
  gen.validate();
  model.validate();
  weights.validate();
  ProgressiveConfig p = progressive;
  p.validate();
  if (epochs_per_step == 0) throw std::invalid_argument("config: epochs_per_step must be >= 1");
  if (batch == 0) throw std::invalid_argument("config: batch must be >= 1");
  if (optimizer.lr_gnn < 0 || optimizer.lr_backbone < 0 || optimizer.weight_decay < 0) {
    throw std::invalid_argument("config: learning rates and weight decay must be >= 0");
  }
  if (optimizer.lr_decay_every_epochs == 0) {
    throw std::invalid_argument("config: lr_decay_every_epochs must be >= 1");
  }
  if (model.input_dim != gen.feature_dim) {
    throw std::invalid_argument("config: model.input_dim (" + std::to_string(model.input_dim) +
                                ") differs from gen.feature_dim (" +
                                std::to_string(gen.feature_dim) + ")");
  }
  if (model.num_classes != gen.known_classes) {
    throw std::invalid_argument("config: model.num_classes differs from gen.known_classes");
  }
  if (early_stop_step && *early_stop_step == 0) {
    throw std::invalid_argument("config: early_stop_step must be >= 1");
  }
  if (!transductive && !(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw std::invalid_argument("config: eval_fraction must lie in (0, 1)");
  }
}

RunConfig RunConfig::effective() const {
  RunConfig out = *this;
  if (ablation.no_progressive) out.progressive.alpha = 1.0;
  if (ablation.nll_loss) out.weights.rho = 0.0;
  if (ablation.no_gnn) {
    out.model.use_gnn = false;
    out.weights.mu = 0.0;
  }
  return out;
}

double RunConfig::lr_multiplier(std::size_t epoch_in_step) const {
  const auto k = epoch_in_step / optimizer.lr_decay_every_epochs;
  return std::pow(optimizer.lr_decay_factor, static_cast<double>(k));
}

RunConfig reference_config() {
  RunConfig c;
  c.gen.known_classes = 4;
  c.gen.unknown_clusters = 4;
  c.gen.feature_dim = 16;
  c.gen.n_source = 2000;
  c.gen.n_target = 2000;
  c.gen.openness = 0.5;
  c.gen.shift.rotation_rad = std::numbers::pi / 9.0;
  c.gen.unknown_radius_factor = 0.5;
  c.gen.shift.scale_jitter = 0.1;
  c.model.input_dim = 16;
  c.model.num_classes = 4;
  c.progressive.alpha = 0.05;
  c.progressive.beta = 0.5;
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  auto& g = j["gen"];
  g["known_classes"] = c.gen.known_classes;
  g["unknown_clusters"] = c.gen.unknown_clusters;
  g["feature_dim"] = c.gen.feature_dim;
  g["n_source"] = c.gen.n_source;
  g["n_target"] = c.gen.n_target;
  g["openness"] = c.gen.openness;
  g["shift"]["rotation_rad"] = c.gen.shift.rotation_rad;
  g["shift"]["translation"] = c.gen.shift.translation;
  g["shift"]["scale_jitter"] = c.gen.shift.scale_jitter;
  g["source_priors"] = c.gen.source_priors ? json(*c.gen.source_priors) : json(nullptr);
  g["target_priors"] = c.gen.target_priors ? json(*c.gen.target_priors) : json(nullptr);
  g["radius"] = c.gen.radius;
  g["unknown_radius_factor"] = c.gen.unknown_radius_factor;
  g["cluster_std"] = c.gen.cluster_std;
  g["seed"] = c.gen.seed;

  auto& m = j["model"];
  m["input_dim"] = c.model.input_dim;
  m["backbone_dims"] = c.model.backbone_dims;
  m["gnn_depth"] = c.model.gnn_depth;
  m["edge_hidden_width"] = c.model.edge_hidden_width;
  m["discriminator_hidden_width"] = c.model.discriminator_hidden_width;
  m["num_classes"] = c.model.num_classes;
  m["dropout"] = c.model.dropout;
  m["leaky_slope"] = c.model.leaky_slope;
  m["use_gnn"] = c.model.use_gnn;

  j["weights"] = {{"mu", c.weights.mu}, {"gamma", c.weights.gamma}, {"rho", c.weights.rho}};
  j["progressive"] = {{"alpha", c.progressive.alpha}, {"beta", c.progressive.beta}};
  j["optimizer"] = {{"lr_gnn", c.optimizer.lr_gnn},
                    {"lr_backbone", c.optimizer.lr_backbone},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"lr_decay_factor", c.optimizer.lr_decay_factor},
                    {"lr_decay_every_epochs", c.optimizer.lr_decay_every_epochs}};
  j["epochs_per_step"] = c.epochs_per_step;
  j["batch"] = c.batch;
  j["ablation"] = {{"no_progressive", c.ablation.no_progressive},
                   {"nll_loss", c.ablation.nll_loss},
                   {"no_gnn", c.ablation.no_gnn},
                   {"no_mixup", c.ablation.no_mixup}};
  j["early_stop_step"] = c.early_stop_step ? json(*c.early_stop_step) : json(nullptr);
  j["transductive"] = c.transductive;
  j["eval_fraction"] = c.eval_fraction;
  j["seed"] = c.seed;
  return j;
}

namespace {

// Overlays `src` onto `dst`, rejecting keys that `dst` does not have.
void merge_known(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) {
    dst = src;
    return;
  }
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) throw std::invalid_argument("config: unknown key '" + key + "'");
    auto& slot = dst[it.key()];
    if (slot.is_object() && it.value().is_object()) {
      merge_known(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
std::optional<T> optional_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace

RunConfig config_from_json(const json& input) {
  json j = to_json(RunConfig{});
  merge_known(j, input, "");
  RunConfig c;
  try {
    const auto& g = j.at("gen");
    c.gen.known_classes = g.at("known_classes").get<int>();
    c.gen.unknown_clusters = g.at("unknown_clusters").get<int>();
    c.gen.feature_dim = g.at("feature_dim").get<std::size_t>();
    c.gen.n_source = g.at("n_source").get<std::size_t>();
    c.gen.n_target = g.at("n_target").get<std::size_t>();
    c.gen.openness = g.at("openness").get<double>();
    c.gen.shift.rotation_rad = g.at("shift").at("rotation_rad").get<double>();
    c.gen.shift.translation = g.at("shift").at("translation").get<std::vector<double>>();
    c.gen.shift.scale_jitter = g.at("shift").at("scale_jitter").get<double>();
    c.gen.source_priors = optional_of<std::vector<double>>(g.at("source_priors"));
    c.gen.target_priors = optional_of<std::vector<double>>(g.at("target_priors"));
    c.gen.radius = g.at("radius").get<double>();
    c.gen.unknown_radius_factor = g.at("unknown_radius_factor").get<double>();
    c.gen.cluster_std = g.at("cluster_std").get<double>();
    c.gen.seed = g.at("seed").get<std::uint64_t>();

    const auto& m = j.at("model");
    c.model.input_dim = m.at("input_dim").get<std::size_t>();
    c.model.backbone_dims = m.at("backbone_dims").get<std::vector<std::size_t>>();
    c.model.gnn_depth = m.at("gnn_depth").get<std::size_t>();
    c.model.edge_hidden_width = m.at("edge_hidden_width").get<std::size_t>();
    c.model.discriminator_hidden_width = m.at("discriminator_hidden_width").get<std::size_t>();
    c.model.num_classes = m.at("num_classes").get<int>();
    c.model.dropout = m.at("dropout").get<double>();
    c.model.leaky_slope = m.at("leaky_slope").get<double>();
    c.model.use_gnn = m.at("use_gnn").get<bool>();

    c.weights.mu = j.at("weights").at("mu").get<double>();
    c.weights.gamma = j.at("weights").at("gamma").get<double>();
    c.weights.rho = j.at("weights").at("rho").get<double>();
    c.progressive.alpha = j.at("progressive").at("alpha").get<double>();
    c.progressive.beta = j.at("progressive").at("beta").get<double>();

    const auto& o = j.at("optimizer");
    c.optimizer.lr_gnn = o.at("lr_gnn").get<double>();
    c.optimizer.lr_backbone = o.at("lr_backbone").get<double>();
    c.optimizer.weight_decay = o.at("weight_decay").get<double>();
    c.optimizer.lr_decay_factor = o.at("lr_decay_factor").get<double>();
    c.optimizer.lr_decay_every_epochs = o.at("lr_decay_every_epochs").get<std::size_t>();

    c.epochs_per_step = j.at("epochs_per_step").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    const auto& a = j.at("ablation");
    c.ablation.no_progressive = a.at("no_progressive").get<bool>();
    c.ablation.nll_loss = a.at("nll_loss").get<bool>();
    c.ablation.no_gnn = a.at("no_gnn").get<bool>();
    c.ablation.no_mixup = a.at("no_mixup").get<bool>();
    c.early_stop_step = optional_of<std::size_t>(j.at("early_stop_step"));
    c.transductive = j.at("transductive").get<bool>();
    c.eval_fraction = j.at("eval_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    pointer += "/" + key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr)) throw std::invalid_argument("override: unknown key '" + key + "'");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  j[ptr] = value;
}

std::uint64_t config_digest(const RunConfig& config) {
  return derive_seed(0, to_json(config).dump());
}

}  // namespace pgl
