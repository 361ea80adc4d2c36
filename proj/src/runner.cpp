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

#include "pgl/runner.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pgl/objective.hpp"
#include "pgl/optim.hpp"
#include "pgl/rng.hpp"

namespace pgl {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json scores_json(const OpenSetScores& s) {
  return {{"ALL", s.all}, {"OS", s.os}, {"OS_star", s.os_star}, {"acc_unknown", s.acc_unknown}};
}

// Source sample ids grouped by class, index c-1 for class c.
std::vector<std::vector<std::size_t>> source_by_class(const DomainPair& pair) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(pair.num_classes()));
  for (std::size_t i = 0; i < pair.source.size(); ++i) {
    out.at(static_cast<std::size_t>(pair.source[i].label - 1)).push_back(i);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (out[c].empty()) {
      throw std::invalid_argument("source domain has no samples of class " + std::to_string(c + 1));
    }
  }
  return out;
}

const std::vector<double>& slot_features(const DomainPair& pair, const ClassSlot& slot) {
  return slot.origin == SlotOrigin::Source ? pair.source.at(slot.id).features
                                           : pair.target.at(slot.id).features;
}

struct EpisodeLoss {
  Tensor total;
  double node = 0.0;
  double edge = 0.0;
  double adversarial = 0.0;
};

EpisodeLoss episode_loss(const Model& model, const DomainPair& pair, const Episode& ep,
                         const RunConfig& cfg, Rng& dropout_rng) {
  std::vector<const std::vector<double>*> rows;
  std::vector<std::size_t> labeled;
  std::vector<Label> labels;
  std::vector<std::size_t> source_rows;
  std::vector<std::size_t> target_rows;
  for (const auto& slot : ep.class_slots) {
    const auto r = rows.size();
    rows.push_back(&slot_features(pair, slot));
    labeled.push_back(r);
    labels.push_back(slot.label);
    (slot.origin == SlotOrigin::Source ? source_rows : target_rows).push_back(r);
  }
  for (auto id : ep.target_ids) {
    target_rows.push_back(rows.size());
    rows.push_back(&pair.target.at(id).features);
  }

  const GraphOutput out = model.forward(features_tensor(rows), true, dropout_rng);
  LossParts parts;
  parts.node = focal_node_loss(out.probs, labeled, labels, cfg.weights.rho);
  EpisodeLoss result;
  result.node = parts.node.item();
  if (cfg.model.use_gnn && cfg.weights.mu > 0.0) {
    parts.edge = edge_loss(out.edges, labeled, labels);
    result.edge = parts.edge.item();
  }
  if (cfg.weights.gamma > 0.0 && !source_rows.empty() && !target_rows.empty()) {
    const Tensor d = model.discriminate(out.nodes.front(), 1.0);
    parts.adversarial =
        adversarial_loss(gather_rows(d, source_rows), gather_rows(d, target_rows)).value;
    result.adversarial = parts.adversarial.item();
  }
  result.total = total_loss(parts, cfg.weights);
  return result;
}

bool finite(double v) { return std::isfinite(v); }

Checkpoint make_checkpoint(const RunConfig& cfg, const Model& model, const Adam& backbone_opt,
                           const Adam& head_opt, const Rng& dropout_rng,
                           const PseudoLabelStore& store, std::size_t epoch) {
  Checkpoint c = capture_model(cfg, model, store);
  for (const Adam* opt : {&backbone_opt, &head_opt}) {
    OptimizerRecord o;
    o.steps = opt->steps_taken();
    o.first = opt->first_moments();
    o.second = opt->second_moments();
    c.optimizers.push_back(std::move(o));
  }
  c.rng_states.emplace_back("dropout", dropout_rng.save_state());
  c.epoch = epoch;
  return c;
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%03zu.ckpt", step);
  return buf;
}

}  // namespace

Checkpoint capture_model(const RunConfig& config, const Model& model,
                         const PseudoLabelStore& store) {
  Checkpoint c;
  c.config_digest = config_digest(config);
  for (const auto& p : model.parameters()) {
    const auto v = p.tensor.values();
    c.tensors.push_back({p.name, p.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  c.step = store.step;
  c.store = store;
  c.config_json = to_json(config).dump();
  return c;
}

void write_metrics_header(std::ostream& out) {
  out << "step,epoch,ALL,OS,OS_star,acc_unknown,loss_n,loss_e,loss_d,n_pseudo_known,"
         "n_pseudo_unknown,lr\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.step << ',' << r.epoch << ',' << format_double(r.scores.all) << ','
      << format_double(r.scores.os) << ',' << format_double(r.scores.os_star) << ','
      << format_double(r.scores.acc_unknown) << ',' << format_double(r.loss_n) << ','
      << format_double(r.loss_e) << ',' << format_double(r.loss_d) << ',' << r.n_pseudo_known << ','
      << r.n_pseudo_unknown << ',' << format_double(r.lr) << '\n';
}

json RunManifest::to_json() const {
  json j;
  j["config"] = config;
  j["version"] = version;
  j["started"] = started;
  j["finished"] = finished;
  j["status"] = status;
  j["checkpoints"] = checkpoints;
  auto& steps = j["steps"];
  steps = json::array();
  for (const auto& r : step_summary) {
    json s = scores_json(r.scores);
    s["step"] = r.step;
    s["n_pseudo_known"] = r.n_pseudo_known;
    s["n_pseudo_unknown"] = r.n_pseudo_unknown;
    s["loss_n"] = r.loss_n;
    s["loss_e"] = r.loss_e;
    s["loss_d"] = r.loss_d;
    steps.push_back(std::move(s));
  }
  return j;
}

PreparedData prepare_data(const RunConfig& config) {
  GenSpec gen = config.gen;
  gen.seed = derive_seed(config.seed, "data");
  DomainPair full = generate(gen);
  PreparedData out;
  if (config.transductive) {
    out.train = std::move(full);
  } else {
    HoldoutSplit split =
        holdout_split(full, config.eval_fraction, derive_seed(config.seed, "data.split"));
    out.train = std::move(split.train);
    out.eval = std::move(split.eval);
  }
  for (auto& s : out.train.target) {
    out.train_truth.push_back(s.label);
    s.label = 0;
  }
  for (const auto& s : out.eval) out.eval_truth.push_back(s.label);
  return out;
}

Tensor score_samples(const Model& model, const DomainPair& pair, const std::vector<Sample>& samples,
                     std::uint64_t root_seed) {
  NoGradGuard no_grad;
  const int C = pair.num_classes();
  const auto by_class = source_by_class(pair);
  Rng support(root_seed, "support");
  Rng unused(0);
  std::vector<double> probs;
  probs.reserve(samples.size() * static_cast<std::size_t>(C));
  const auto chunk = static_cast<std::size_t>(C);
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto end = std::min(samples.size(), start + chunk);
    std::vector<const std::vector<double>*> rows;
    for (const auto& ids : by_class)
      rows.push_back(&pair.source[ids[support.index(ids.size())]].features);
    for (std::size_t i = start; i < end; ++i) rows.push_back(&samples[i].features);
    const GraphOutput out = model.forward(features_tensor(rows), false, unused);
    const Tensor& p = out.probs.back();
    for (std::size_t r = chunk; r < p.rows(); ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) probs.push_back(p.at(r, c));
  }
  return Tensor::from({samples.size(), chunk}, std::move(probs));
}

std::vector<EvalRecord> evaluate_model(const Model& model, const PreparedData& data,
                                       const PseudoLabelStore& store, const RunConfig& config) {
  const int C = data.train.num_classes();
  ProgressiveConfig prog = config.progressive;
  prog.n_target = data.train.target.size();
  const double frac = prog.labeled_fraction(store.step);
  std::vector<EvalRecord> out;

  const Tensor train_probs = score_samples(model, data.train, data.train.target, config.seed);
  std::vector<std::size_t> ids(data.train.target.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  EvalRecord train_rec;
  train_rec.split = "train";
  train_rec.predictions = predict_openset(train_probs, ids, &store, prog.beta, frac);
  train_rec.scores = score(data.train_truth, train_rec.predictions, C);
  out.push_back(std::move(train_rec));

  if (!data.eval.empty()) {
    const Tensor eval_probs = score_samples(model, data.train, data.eval, config.seed);
    std::vector<std::size_t> eval_ids(data.eval.size());
    for (std::size_t i = 0; i < eval_ids.size(); ++i) eval_ids[i] = i;
    EvalRecord rec;
    rec.split = "eval";
    rec.predictions = predict_openset(eval_probs, eval_ids, nullptr, prog.beta, frac);
    rec.scores = score(data.eval_truth, rec.predictions, C);
    out.push_back(std::move(rec));
  }
  return out;
}

RunResult train(const RunConfig& input_config, const TrainOptions& options) {
  input_config.validate();
  const RunConfig cfg = input_config.effective();
  RunResult result;
  result.manifest.config = to_json(input_config);
  result.manifest.started = timestamp();

  const PreparedData data = prepare_data(cfg);
  const DomainPair& pair = data.train;
  const int C = pair.num_classes();
  ProgressiveConfig prog = cfg.progressive;
  prog.n_target = pair.target.size();
  const std::size_t total_steps = prog.total_steps();
  const std::size_t last_step =
      cfg.early_stop_step ? std::min(*cfg.early_stop_step, total_steps) : total_steps;
  const std::size_t batches = episodes_per_epoch(pair.target.size(), C) / cfg.batch +
                              (episodes_per_epoch(pair.target.size(), C) % cfg.batch ? 1 : 0);

  Model model(cfg.model, cfg.seed);
  Adam backbone_opt(model.backbone_parameters());
  Adam head_opt(model.head_parameters());
  Rng dropout_rng(cfg.seed, "dropout");
  const std::uint64_t episode_root = derive_seed(cfg.seed, "episodes");
  PseudoLabelStore store;

  std::ostringstream csv;
  write_metrics_header(csv);
  std::optional<std::ofstream> csv_file;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir / "checkpoints");
    csv_file.emplace(*options.out_dir / "metrics.csv", std::ios::trunc);
    write_metrics_header(*csv_file);
  }
  auto emit = [&](const MetricsRow& row) {
    write_metrics_row(csv, row);
    if (csv_file) {
      write_metrics_row(*csv_file, row);
      csv_file->flush();
    }
    result.rows.push_back(row);
    if (options.verbose) {
      std::cerr << "step " << row.step << " epoch " << row.epoch << " OS " << row.scores.os
                << " OS* " << row.scores.os_star << " UNK " << row.scores.acc_unknown << " loss_n "
                << row.loss_n << '\n';
    }
  };
  auto current_scores = [&]() {
    const auto recs = evaluate_model(model, data, store, cfg);
    return recs.back().scores;
  };

  std::size_t global_epoch = 0;
  for (std::size_t m = 0; m < last_step && !result.aborted; ++m) {
    try {
      double step_n = 0.0, step_e = 0.0, step_d = 0.0;
      double lr_now = cfg.optimizer.lr_gnn;
      for (std::size_t e = 0; e < cfg.epochs_per_step; ++e, ++global_epoch) {
        const double mult = cfg.lr_multiplier(e);
        lr_now = cfg.optimizer.lr_gnn * mult;
        double sum_n = 0.0, sum_e = 0.0, sum_d = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < batches; ++b) {
          const std::uint64_t batch_seed =
              derive_seed(episode_root, std::to_string(global_epoch) + "." + std::to_string(b));
          const EpisodeBatch batch =
              (m == 0 || cfg.ablation.no_mixup)
                  ? build_initial_batch(pair, C, cfg.batch, batch_seed)
                  : build_mixup_batch(pair, store, m, prog.alpha, C, cfg.batch, batch_seed);
          Tensor loss;
          for (const auto& ep : batch.episodes) {
            EpisodeLoss el = episode_loss(model, pair, ep, cfg, dropout_rng);
            loss = loss.defined() ? add(loss, el.total) : el.total;
            sum_n += el.node;
            sum_e += el.edge;
            sum_d += el.adversarial;
            ++count;
          }
          loss = scale(loss, 1.0 / static_cast<double>(batch.episodes.size()));
          if (!finite(loss.item())) {
            result.aborted = true;
            result.manifest.status = "aborted: non-finite loss at step " + std::to_string(m) +
                                     " epoch " + std::to_string(global_epoch) + " batch " +
                                     std::to_string(b);
            break;
          }
          backward(loss);
          backbone_opt.step(cfg.optimizer.lr_backbone * mult, cfg.optimizer.weight_decay);
          head_opt.step(cfg.optimizer.lr_gnn * mult, cfg.optimizer.weight_decay);
        }
        if (result.aborted) break;
        MetricsRow row;
        row.step = static_cast<long>(m);
        row.epoch = static_cast<long>(global_epoch);
        row.scores = current_scores();
        row.loss_n = sum_n / static_cast<double>(count);
        row.loss_e = sum_e / static_cast<double>(count);
        row.loss_d = sum_d / static_cast<double>(count);
        row.n_pseudo_known = store.known.size();
        row.n_pseudo_unknown = store.unknown.size();
        row.lr = lr_now;
        emit(row);
        step_n += row.loss_n;
        step_e += row.loss_e;
        step_d += row.loss_d;
      }
      if (result.aborted) break;

      const Tensor probs = score_samples(model, pair, pair.target, cfg.seed);
      store = pseudo_label_step(probs, store, prog);

      MetricsRow row;
      row.step = static_cast<long>(store.step);
      row.epoch = -1;
      row.scores = current_scores();
      const auto epochs = static_cast<double>(cfg.epochs_per_step);
      row.loss_n = step_n / epochs;
      row.loss_e = step_e / epochs;
      row.loss_d = step_d / epochs;
      row.n_pseudo_known = store.known.size();
      row.n_pseudo_unknown = store.unknown.size();
      row.lr = lr_now;
      emit(row);
      result.manifest.step_summary.push_back(row);
      result.final_scores = row.scores;

      if (options.out_dir) {
        const auto path = *options.out_dir / "checkpoints" / checkpoint_name(store.step);
        save_checkpoint(path, make_checkpoint(input_config, model, backbone_opt, head_opt,
                                              dropout_rng, store, global_epoch));
        result.manifest.checkpoints.push_back(path.string());
      }
    } catch (const NonFiniteError& e) {
      result.aborted = true;
      result.manifest.status =
          "aborted: non-finite values during step " + std::to_string(m) + " (" + e.what() + ")";
    }
  }

  result.metrics_csv = csv.str();
  result.manifest.finished = timestamp();
  if (options.out_dir) {
    std::ostringstream store_csv;
    write_store_csv(store_csv, store, C);
    write_file_atomic(*options.out_dir / "store.csv", store_csv.str());
    write_file_atomic(*options.out_dir / "manifest.json", result.manifest.to_json().dump(2) + "\n");
  }
  return result;
}

RestoredRun restore(const Checkpoint& ckpt) {
  RunConfig input;
  try {
    input = config_from_json(json::parse(ckpt.config_json));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: unreadable config: ") + e.what());
  }
  if (config_digest(input) != ckpt.config_digest) {
    throw std::runtime_error("checkpoint: config digest does not match the embedded config");
  }
  RunConfig cfg = input.effective();
  Model model(cfg.model, cfg.seed);
  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  for (auto& p : model.parameters()) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing tensor '" + p.name + "'");
    if (it->second->shape != p.tensor.shape()) {
      throw std::runtime_error("checkpoint: tensor '" + p.name + "' has shape " +
                               shape_string(it->second->shape) + ", model expects " +
                               shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
  }
  return RestoredRun{input, std::move(model), ckpt.store};
}

std::vector<EvalRecord> evaluate(const std::filesystem::path& checkpoint) {
  RestoredRun run = restore(load_checkpoint(checkpoint));
  const RunConfig cfg = run.config.effective();
  const PreparedData data = prepare_data(cfg);
  return evaluate_model(run.model, data, run.store, cfg);
}

RunConfig apply_variant(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  c.ablation = AblationFlags{};
  if (variant == "full") return c;
  if (variant == "no_progressive") {
    c.ablation.no_progressive = true;
  } else if (variant == "nll") {
    c.ablation.nll_loss = true;
  } else if (variant == "no_gnn") {
    c.ablation.no_gnn = true;
  } else if (variant == "no_mixup") {
    c.ablation.no_mixup = true;
  } else {
    throw std::invalid_argument("unknown ablation variant '" + variant +
                                "' (expected full, no_progressive, nll, no_gnn, no_mixup)");
  }
  return c;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, bool verbose) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    for (auto seed : seeds) {
      RunConfig c = apply_variant(base, v);
      c.seed = seed;
      const RunResult r = train(c);
      if (r.aborted)
        throw std::runtime_error("ablation run " + v + " aborted: " + r.manifest.status);
      if (verbose) {
        std::cerr << v << " seed " << seed << " OS " << r.final_scores.os << " OS* "
                  << r.final_scores.os_star << " UNK " << r.final_scores.acc_unknown << '\n';
      }
      rows.push_back({v, seed, r.final_scores});
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,runs,UNK,ALL,OS,OS_star\n";
  std::vector<std::string> order;
  std::map<std::string, std::vector<const AblationRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.variant)) order.push_back(r.variant);
    groups[r.variant].push_back(&r);
  }
  for (const auto& v : order) {
    const auto& g = groups[v];
    double unk = 0, all = 0, os = 0, os_star = 0;
    for (const auto* r : g) {
      unk += r->scores.acc_unknown;
      all += r->scores.all;
      os += r->scores.os;
      os_star += r->scores.os_star;
    }
    const double n = static_cast<double>(g.size());
    out << v << ',' << g.size() << ',' << format_double(unk / n) << ',' << format_double(all / n)
        << ',' << format_double(os / n) << ',' << format_double(os_star / n) << '\n';
  }
}

Tensor final_edges(const Model& model, const DomainPair& pair, std::uint64_t root_seed) {
  if (!model.config().use_gnn) throw std::invalid_argument("edges: model has no graph layers");
  NoGradGuard no_grad;
  const auto by_class = source_by_class(pair);
  Rng support(root_seed, "support");
  Rng unused(0);
  std::vector<const std::vector<double>*> rows;
  for (const auto& ids : by_class)
    rows.push_back(&pair.source[ids[support.index(ids.size())]].features);
  const auto n = std::min(pair.target.size(), by_class.size());
  for (std::size_t i = 0; i < n; ++i) rows.push_back(&pair.target[i].features);
  return model.forward(features_tensor(rows), false, unused).edges.back();
}

void write_embedding_csv(std::ostream& out, const Model& model, const PreparedData& data) {
  NoGradGuard no_grad;
  Rng unused(0);
  std::vector<const std::vector<double>*> rows;
  std::vector<std::pair<const char*, Label>> meta;
  for (const auto& s : data.train.source) {
    rows.push_back(&s.features);
    meta.emplace_back("source", s.label);
  }
  for (std::size_t i = 0; i < data.train.target.size(); ++i) {
    rows.push_back(&data.train.target[i].features);
    meta.emplace_back("target", data.train_truth[i]);
  }
  const Tensor v = model.backbone_forward(features_tensor(rows), false, unused);
  Eigen::MatrixXd x(v.rows(), v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) x(i, j) = v.at(i, j);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov =
      (x.transpose() * x) / static_cast<double>(std::max<Eigen::Index>(1, x.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index k = cov.cols();
  Eigen::MatrixXd basis(k, 2);
  basis.col(0) = eig.eigenvectors().col(k - 1);
  basis.col(1) = k > 1 ? Eigen::VectorXd(eig.eigenvectors().col(k - 2)) : Eigen::VectorXd::Zero(k);
  const Eigen::MatrixXd proj = x * basis;
  out << "domain,label,x,y\n";
  char buf[64];
  for (Eigen::Index i = 0; i < proj.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g", proj(i, 0), proj(i, 1));
    out << meta[static_cast<std::size_t>(i)].first << ','
        << meta[static_cast<std::size_t>(i)].second << ',' << buf << '\n';
  }
}

}  // namespace pgl
