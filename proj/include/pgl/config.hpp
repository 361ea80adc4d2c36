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
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pgl/netmodel.hpp"
#include "pgl/objective.hpp"
#include "pgl/progressive.hpp"
#include "pgl/synthgen.hpp"

namespace pgl {

struct OptimizerConfig {
  double lr_gnn = 1e-4;
  double lr_backbone = 1e-5;
  double weight_decay = 5e-5;
  double lr_decay_factor = 0.5;
  std::size_t lr_decay_every_epochs = 4;
};

struct AblationFlags {
  bool no_progressive = false;
  bool nll_loss = false;
  bool no_gnn = false;
  bool no_mixup = false;
};

struct RunConfig {
  GenSpec gen;
  ModelConfig model;
  LossWeights weights;
  ProgressiveConfig progressive;  // n_target is filled in by the runner
  OptimizerConfig optimizer;
  std::size_t epochs_per_step = 5;
  std::size_t batch = 2;
  AblationFlags ablation;
  std::optional<std::size_t> early_stop_step;
  // Evaluate on the whole target set (true) or on a stratified holdout.
  bool transductive = true;
  double eval_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  // Copy with ablation flags folded into the concrete settings.
  RunConfig effective() const;
  // Learning-rate multiplier for a 0-based epoch index within a step.
  double lr_multiplier(std::size_t epoch_in_step) const;
};

// The desk-scale reference problem: C=4 known classes, 4 unknown clusters,
// 16-D features, openness 0.5, 2000 source and 2000 target samples, 20 degree
// rotation of the target known classes, unknown clusters at half the radius.
RunConfig reference_config();

nlohmann::json to_json(const RunConfig& config);
// Fields missing from `j` keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

// Applies "a.b.c=value" to a JSON config. Value text is parsed as JSON when
// possible, else taken as a string. The key must already exist.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Stable 64-bit digest of the canonical JSON form.
std::uint64_t config_digest(const RunConfig& config);

}  // namespace pgl
