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

// Training orchestration: alternate episodic optimization with progressive
// pseudo-labeling until every target sample is labeled or the early-stop
// step is reached.
//
// Randomness is split from the root seed into the streams "data" (dataset
// and holdout split), "episodes" (episode sampling and slot replacement),
// "dropout", "init" and "support" (support nodes used at scoring time).

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pgl/checkpoint.hpp"
#include "pgl/config.hpp"
#include "pgl/episodic.hpp"
#include "pgl/evalmetrics.hpp"
#include "pgl/netmodel.hpp"
#include "pgl/progressive.hpp"
#include "pgl/synthgen.hpp"

namespace pgl {

inline constexpr const char* kArtifactVersion = "0.1.0";

// One metrics CSV line. epoch = -1 marks the summary row written after a
// pseudo-labeling step.
struct MetricsRow {
  long step = 0;
  long epoch = 0;
  OpenSetScores scores;
  double loss_n = 0.0;
  double loss_e = 0.0;
  double loss_d = 0.0;
  std::size_t n_pseudo_known = 0;
  std::size_t n_pseudo_unknown = 0;
  double lr = 0.0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

struct RunManifest {
  nlohmann::json config;
  std::string version = kArtifactVersion;
  std::string started;
  std::string finished;
  std::vector<MetricsRow> step_summary;
  std::vector<std::string> checkpoints;
  std::string status = "completed";

  nlohmann::json to_json() const;
};

struct TrainOptions {
  // When set: metrics.csv, manifest.json, store.csv and checkpoints/ go here.
  std::optional<std::filesystem::path> out_dir;
  bool verbose = false;
};

struct RunResult {
  RunManifest manifest;
  std::vector<MetricsRow> rows;
  std::string metrics_csv;
  OpenSetScores final_scores;
  bool aborted = false;
};

// Dataset view used by training and evaluation. Training code only sees
// `train`, whose target labels are blanked; hidden labels live in the
// truth vectors and are read by scoring only.
struct PreparedData {
  DomainPair train;
  std::vector<Label> train_truth;
  std::vector<Sample> eval;  // empty in transductive mode
  std::vector<Label> eval_truth;
};

PreparedData prepare_data(const RunConfig& config);

// Class probabilities for `samples`, one row each. Samples are scored C at a
// time in graphs that also hold one source node per class.
Tensor score_samples(const Model& model, const DomainPair& pair, const std::vector<Sample>& samples,
                     std::uint64_t root_seed);

struct EvalRecord {
  std::string split;  // "train" or "eval"
  OpenSetScores scores;
  std::vector<Label> predictions;
};

// Scores the target training split (using the store) and, in holdout mode,
// the eval split (ranked with the current step's threshold).
std::vector<EvalRecord> evaluate_model(const Model& model, const PreparedData& data,
                                       const PseudoLabelStore& store, const RunConfig& config);

RunResult train(const RunConfig& config, const TrainOptions& options = {});

// Restores the model and store from a checkpoint written by train().
struct RestoredRun {
  RunConfig config;
  Model model;
  PseudoLabelStore store;
};

// Model weights, store and config without optimizer or RNG state.
Checkpoint capture_model(const RunConfig& config, const Model& model,
                         const PseudoLabelStore& store);

RestoredRun restore(const Checkpoint& ckpt);

std::vector<EvalRecord> evaluate(const std::filesystem::path& checkpoint);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  OpenSetScores scores;
};

// Variant names: full, no_progressive, nll, no_gnn, no_mixup.
RunConfig apply_variant(const RunConfig& base, const std::string& variant);

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, bool verbose = false);

// Per-variant means, columns variant,runs,UNK,ALL,OS,OS_star.
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

// E^(L) of the graph built from the first support set and the first C target
// samples, as a CSV matrix.
Tensor final_edges(const Model& model, const DomainPair& pair, std::uint64_t root_seed);

// 2-D principal-component projection of backbone features V^(0) for every
// source and target sample. Columns domain,label,x,y.
void write_embedding_csv(std::ostream& out, const Model& model, const PreparedData& data);

}  // namespace pgl
