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

// Acceptance suite: prints one PASS/FAIL line per criterion on stdout and
// exits non-zero if any criterion fails. Progress goes to stderr.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pgl/boundlab.hpp"
#include "pgl/checkpoint.hpp"
#include "pgl/config.hpp"
#include "pgl/evalmetrics.hpp"
#include "pgl/netmodel.hpp"
#include "pgl/objective.hpp"
#include "pgl/progressive.hpp"
#include "pgl/runner.hpp"

using namespace pgl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from({r, c}, std::move(v));
}

// 1. Gradient correctness on randomized micro-models.
Outcome gradient_correctness() {
  Rng rng(derive_seed(1, "acceptance.gradients"));
  double worst = 0.0;
  std::size_t checked = 0, failures = 0;
  for (int model_index = 0; model_index < 50; ++model_index) {
    ModelConfig mc;
    mc.input_dim = 2 + rng.index(3);
    mc.backbone_dims = {3 + rng.index(3), 3 + rng.index(3)};
    mc.gnn_depth = 1 + rng.index(2);
    mc.edge_hidden_width = 3 + rng.index(3);
    mc.discriminator_hidden_width = 2 + rng.index(3);
    mc.num_classes = 2 + static_cast<int>(rng.index(2));
    Model m(mc, rng.engine()());
    for (auto& p : m.parameters())
      if (p.name.find("bias") != std::string::npos)
        for (auto& b : p.tensor.mutable_values()) b = rng.uniform(-0.5, 0.5);

    const std::size_t n = 2 + rng.index(5);
    const Tensor x = random_matrix(rng, n, mc.input_dim);
    const std::size_t n_src = (n + 1) / 2;
    std::vector<std::size_t> src, tgt;
    std::vector<Label> labels;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_src) {
        src.push_back(i);
        labels.push_back(static_cast<Label>(1 + rng.index(static_cast<std::size_t>(mc.num_classes))));
      } else {
        tgt.push_back(i);
      }
    }
    const LossWeights w{rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.bernoulli(0.5) ? 2.0 : 0.0};
    Rng unused(0);

    // Sign applied to the adversarial term as seen by the backbone.
    for (int objective = 0; objective < 4; ++objective) {
      auto build = [&](double adv_sign) {
        const GraphOutput g = m.forward(x, false, unused);
        LossParts parts;
        const Tensor node = focal_node_loss(g.probs, src, labels, w.rho);
        const Tensor edge = edge_loss(g.edges, src, labels);
        const Tensor adv = adversarial_loss(m.discriminate(gather_rows(g.nodes[0], src), 1.0),
                                            m.discriminate(gather_rows(g.nodes[0], tgt), 1.0))
                               .value;
        switch (objective) {
          case 0:
            return node;
          case 1:
            return edge;
          case 2:
            return scale(adv, adv_sign);
          default:
            parts.node = node;
            parts.edge = edge;
            parts.adversarial = scale(adv, adv_sign);
            return total_loss(parts, w);
        }
      };
      for (auto& p : m.parameters()) p.tensor.clear_grad();
      backward(build(1.0));
      auto check_group = [&](const std::vector<NamedParameter>& group, double adv_sign) {
        for (const auto& p : group) {
          const auto numeric = oracle::numeric_gradient(
              [&] {
                NoGradGuard guard;
                return build(adv_sign).item();
              },
              p.tensor);
          const auto analytic = p.tensor.has_grad() ? std::vector<double>(p.tensor.grad().begin(),
                                                                          p.tensor.grad().end())
                                                    : std::vector<double>(numeric.size(), 0.0);
          for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double err = oracle::relative_error(analytic[i], numeric[i]);
            worst = std::max(worst, err);
            ++checked;
            if (err >= 1e-4) {
              ++failures;
              std::cerr << "gradient mismatch: model " << model_index << " objective " << objective
                        << " " << p.name << "[" << i << "] analytic " << analytic[i]
                        << " numeric " << numeric[i] << '\n';
            }
          }
        }
      };
      check_group(m.head_parameters(), 1.0);
      // The reversal layer makes the backbone descend on -L_d.
      check_group(m.backbone_parameters(), -1.0);
    }
  }
  return {failures == 0, std::to_string(checked) + " partials over 50 models, max rel err " +
                             fmt_double("%.2e", worst)};
}

// 2. Edge normalization invariants.
Outcome edge_normalization() {
  Rng rng(derive_seed(2, "acceptance.edges"));
  double worst_asym = 0.0, worst_radius = 0.0, min_entry = 1.0;
  std::size_t bad = 0;
  std::unique_ptr<Model> model;
  for (int trial = 0; trial < 1000; ++trial) {
    if (trial % 50 == 0) {
      ModelConfig mc;
      mc.input_dim = 4;
      mc.backbone_dims = {8, 4 + rng.index(8)};
      mc.edge_hidden_width = 4 + rng.index(12);
      model = std::make_unique<Model>(mc, rng.engine()());
    }
    const std::size_t n = 1 + rng.index(12);
    const Tensor v =
        random_matrix(rng, n, model->config().node_width(), std::exp(rng.uniform(-2.0, 2.0)));
    const Tensor e = model->edge_update(1, v).normalized;
    Eigen::MatrixXd E(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.at(i, j);
    const double asym = (E - E.transpose()).cwiseAbs().maxCoeff();
    const double lowest = E.minCoeff();
    const Eigen::MatrixXd sym = 0.5 * (E + E.transpose());
    const double radius =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().cwiseAbs().maxCoeff();
    worst_asym = std::max(worst_asym, asym);
    worst_radius = std::max(worst_radius, std::abs(radius - 1.0));
    min_entry = std::min(min_entry, lowest);
    if (asym >= 1e-9 || lowest < 0.0 || std::abs(radius - 1.0) > 1e-6) ++bad;
  }
  return {bad == 0, "1000 matrices, max asymmetry " + fmt_double("%.1e", worst_asym) +
                        ", max |rho-1| " + fmt_double("%.1e", worst_radius) + ", min entry " +
                        fmt_double("%.3g", min_entry)};
}

// 3. Progressive bookkeeping.
Outcome progressive_bookkeeping() {
  Rng rng(derive_seed(3, "acceptance.progressive"));
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t steps = 1 + rng.index(20);
    const std::size_t n = 10 + rng.index(1500);
    const std::size_t unknown_total = 1 + rng.index(n - 1);
    ProgressiveConfig cfg{1.0 / static_cast<double>(steps),
                          static_cast<double>(unknown_total) / static_cast<double>(n), n};
    PseudoLabelStore store;
    for (std::size_t m = 1; m <= cfg.total_steps(); ++m) {
      std::vector<double> v(n * 3);
      for (auto& x : v) x = rng.normal();
      const PseudoLabelStore next =
          pseudo_label_step(softmax_rows(Tensor::from({n, 3}, v)), store, cfg);
      bool ok = next.step == m;
      for (const auto& [id, e] : store.known) ok &= next.known.count(id) && next.known.at(id).label == e.label;
      for (const auto& [id, e] : store.unknown) ok &= next.unknown.count(id) == 1;
      for (const auto& [id, e] : next.known) ok &= next.unknown.count(id) == 0;
      if (m < cfg.total_steps()) {
        const double md = static_cast<double>(m), nd = static_cast<double>(n);
        ok &= next.unknown.size() == round_count(cfg.beta * cfg.alpha * md * nd);
        ok &= next.known.size() == round_count((1.0 - cfg.beta) * cfg.alpha * md * nd);
      } else {
        ok &= next.size() == n;
        ok &= next.unknown.size() == unknown_total;
        ok &= static_cast<double>(next.unknown.size()) / static_cast<double>(n) == cfg.beta;
      }
      if (!ok) {
        ++bad;
        std::cerr << "bookkeeping violation: trial " << trial << " step " << m << '\n';
      }
      store = next;
    }
  }
  return {bad == 0, "100 configurations, " + std::to_string(bad) + " violations"};
}

// 4. Pseudo-labeler agreement with the brute-force rank oracle.
Outcome oracle_equivalence() {
  Rng rng(derive_seed(4, "acceptance.oracle"));
  std::size_t mismatches = 0, ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 50;
    ProgressiveConfig cfg{1.0 / static_cast<double>(2 + rng.index(9)), rng.uniform(0.05, 0.9), n};
    // Earlier steps populate the store so the ranking pool is a strict subset.
    const std::size_t m = 1 + rng.index(cfg.total_steps());
    PseudoLabelStore store;
    auto draw = [&] {
      std::vector<double> conf(n), v;
      const bool coarse = rng.bernoulli(0.5);
      for (auto& c : conf) c = coarse ? 0.4 + 0.1 * static_cast<double>(rng.index(4)) : rng.uniform(0.34, 1.0);
      for (double c : conf) {
        v.push_back(c);
        v.push_back((1.0 - c) / 2.0);
        v.push_back((1.0 - c) / 2.0);
      }
      return std::make_pair(conf, Tensor::from({n, 3}, v));
    };
    for (std::size_t k = 1; k < m; ++k) store = pseudo_label_step(draw().second, store, cfg);
    const auto [conf, probs] = draw();
    std::set<double> distinct(conf.begin(), conf.end());
    if (distinct.size() < n) ++ties;
    const PseudoLabelStore next = pseudo_label_step(probs, store, cfg);
    std::set<std::size_t> labeled;
    for (const auto& [id, e] : store.known) labeled.insert(id);
    for (const auto& [id, e] : store.unknown) labeled.insert(id);
    const auto expect = oracle::rank_threshold(conf, labeled, cfg.unknown_quota(m) - store.unknown.size(),
                                               cfg.known_quota(m) - store.known.size());
    std::set<std::size_t> got_u, got_k;
    for (const auto& [id, e] : next.unknown)
      if (!store.unknown.count(id)) got_u.insert(id);
    for (const auto& [id, e] : next.known)
      if (!store.known.count(id)) got_k.insert(id);
    if (got_u != expect.unknown || got_k != expect.known) {
      ++mismatches;
      std::cerr << "oracle mismatch: trial " << trial << '\n';
    }
  }
  return {mismatches == 0, "200 vectors (" + std::to_string(ties) + " with ties), " +
                               std::to_string(mismatches) + " mismatches"};
}

// 5. Metric identity and worked example.
Outcome metric_identity() {
  Rng rng(derive_seed(5, "acceptance.metrics"));
  std::size_t bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int C = 1 + static_cast<int>(rng.index(10));
    ConfusionMatrix cm(C);
    for (Label t = 1; t <= C + 1; ++t)
      for (Label p = 1; p <= C + 1; ++p) cm.add(t, p, (p == t ? 1 : 0) + rng.index(20));
    const OpenSetScores s = score(cm);
    const double gap = std::abs(s.os - (C * s.os_star + s.acc_unknown) / (C + 1));
    worst = std::max(worst, gap);
    if (!identity_check(s, C) || gap > 1e-12) ++bad;
  }
  const std::vector<Label> truth{1, 1, 2, 3}, pred{1, 2, 2, 3};
  const OpenSetScores ex = score(truth, pred, 2);
  const bool example = ex.all == 0.75 && ex.per_class[0] == 0.5 && ex.per_class[1] == 1.0 &&
                       ex.per_class[2] == 1.0 && std::abs(ex.os - 0.8333) < 1e-4 &&
                       ex.os_star == 0.75;
  return {bad == 0 && example, "1000 matrices, max identity gap " + fmt_double("%.1e", worst) +
                                   ", worked example " + (example ? "ok" : "wrong")};
}

// 6. Open-set bound over enumerated instances, plus the closed-set reduction.
Outcome ouda_bound() {
  const fs::path dump_dir = "bound_counterexamples";
  std::size_t violations = 0, closed_checked = 0, closed_bad = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  auto persist = [&](const std::string& tag, std::uint64_t seed, const bounds::FiniteInstance& inst,
                     const bounds::BoundTerms& t) {
    fs::create_directories(dump_dir);
    std::ofstream out(dump_dir / (tag + "_" + std::to_string(seed) + ".txt"));
    bounds::write_report_header(out);
    bounds::write_report_row(out, seed, t);
    bounds::write_instance(out, inst);
  };
  auto check_closed = [&](std::uint64_t seed, const bounds::FiniteInstance& inst,
                          const bounds::OudaReport& open) {
    const bounds::OudaReport closed = bounds::check_closed_set_bound(inst);
    ++closed_checked;
    bool ok = closed.tightest.slack >= -1e-12;
    for (std::size_t k = 0; k < inst.hypotheses.size(); ++k) {
      ok &= std::abs(open.per_hypothesis[k].slack - closed.per_hypothesis[k].slack) <= 1e-12;
      ok &= open.per_hypothesis[k].openset_term == 0.0;
    }
    if (!ok) {
      ++closed_bad;
      persist("closed", seed, inst, closed.tightest);
    }
  };
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const bounds::FiniteInstance inst = bounds::random_instance(seed);
    const bounds::OudaReport r = bounds::check_ouda_bound(inst);
    min_slack = std::min(min_slack, r.tightest.slack);
    if (r.tightest.slack < -1e-12) {
      ++violations;
      persist("ouda", seed, inst, r.tightest);
    }
    if (inst.unknown_prior() == 0.0) check_closed(seed, inst, r);
  }
  bounds::InstanceOptions closed_opt;
  closed_opt.closed_set = true;
  for (std::uint64_t seed = 10000; seed < 10100; ++seed) {
    const bounds::FiniteInstance inst = bounds::random_instance(seed, closed_opt);
    check_closed(seed, inst, bounds::check_ouda_bound(inst));
  }
  return {violations == 0 && closed_bad == 0,
          "200 instances, min slack " + fmt_double("%.4g", min_slack) + ", " +
              std::to_string(violations) + " violations; closed-set reduction on " +
              std::to_string(closed_checked) + " instances, " + std::to_string(closed_bad) +
              " mismatches"};
}

// 7. Subset tightness.
Outcome subset_tightness() {
  std::size_t violations = 0;
  for (std::uint64_t seed = 20000; seed < 20500; ++seed) {
    const auto r = bounds::check_subset_tightness(bounds::random_instance(seed));
    if (!r.source_holds || !r.openset_holds) ++violations;
  }
  return {violations == 0, "500 instances, " + std::to_string(violations) + " violations"};
}

struct AblationSummary {
  std::map<std::string, double> mean_os;
  std::vector<double> full_os_star;
};

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 8. Ablation direction on the reference problem.
Outcome ablation_direction(AblationSummary& summary) {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto rows = ablate(reference_config(), {"full", "no_progressive", "no_mixup"}, seeds, true);
  std::map<std::string, std::vector<double>> os;
  for (const auto& r : rows) {
    os[r.variant].push_back(r.scores.os);
    if (r.variant == "full") summary.full_os_star.push_back(r.scores.os_star);
  }
  for (const auto& [k, v] : os) summary.mean_os[k] = mean(v);
  const double full = summary.mean_os["full"], nop = summary.mean_os["no_progressive"],
               nom = summary.mean_os["no_mixup"];
  const bool pass = full - nop >= 0.03 && full >= nom;
  return {pass, "mean OS over 5 seeds: full " + fmt_double("%.1f", 100 * full) +
                    ", no_progressive " + fmt_double("%.1f", 100 * nop) + ", no_mixup " +
                    fmt_double("%.1f", 100 * nom)};
}

// 9. Chance floor for untrained models, convergence for trained ones.
Outcome chance_floor(const AblationSummary& summary) {
  const RunConfig cfg = reference_config().effective();
  const PreparedData data = prepare_data(cfg);
  std::vector<double> untrained;
  for (std::uint64_t init = 0; init < 200; ++init) {
    const Model model(cfg.model, derive_seed(init, "acceptance.chance"));
    untrained.push_back(evaluate_model(model, data, {}, cfg).front().scores.os_star);
  }
  const double chance = 100.0 / cfg.gen.known_classes;
  const double floor_mean = 100.0 * mean(untrained);
  bool pass = std::abs(floor_mean - chance) <= 5.0;
  double worst_trained = std::numeric_limits<double>::infinity();
  for (double v : summary.full_os_star) worst_trained = std::min(worst_trained, 100.0 * v);
  pass &= !summary.full_os_star.empty() && worst_trained > 1.5 * chance;
  return {pass, "untrained OS* mean over 200 inits " + fmt_double("%.1f", floor_mean) +
                    " (chance " + fmt_double("%.1f", chance) + "), worst trained OS* " +
                    fmt_double("%.1f", worst_trained) + " (needs > " +
                    fmt_double("%.1f", 1.5 * chance) + ")"};
}

RunConfig determinism_config() {
  RunConfig c = reference_config();
  c.gen.n_source = 400;
  c.gen.n_target = 400;
  c.progressive.alpha = 0.2;
  c.epochs_per_step = 2;
  c.seed = 17;
  return c;
}

// 10. Determinism and bit-exact checkpoints.
Outcome determinism() {
  const RunConfig cfg = determinism_config();
  const fs::path a = fs::temp_directory_path() / "pgl_acceptance_a";
  const fs::path b = fs::temp_directory_path() / "pgl_acceptance_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const RunResult ra = train(cfg, {a, false});
  const RunResult rb = train(cfg, {b, false});
  const bool csv_same = read_file(a / "metrics.csv") == read_file(b / "metrics.csv") &&
                        !ra.metrics_csv.empty() && ra.metrics_csv == rb.metrics_csv;
  bool store_same = read_file(a / "store.csv") == read_file(b / "store.csv");
  for (std::size_t k = 0; k < ra.manifest.checkpoints.size(); ++k) {
    store_same &= read_file(ra.manifest.checkpoints[k]) == read_file(rb.manifest.checkpoints[k]);
  }

  // Forward outputs after a save/load round trip, on a fixed probe batch.
  const RestoredRun restored = restore(load_checkpoint(ra.manifest.checkpoints.back()));
  const RunConfig eff = restored.config.effective();
  const fs::path copy = a / "copy.ckpt";
  save_checkpoint(copy, capture_model(restored.config, restored.model, restored.store));
  const RestoredRun reloaded = restore(load_checkpoint(copy));
  Rng probe_rng(5);
  const Tensor probe = random_matrix(probe_rng, 12, eff.model.input_dim);
  Rng r1(0), r2(0);
  const GraphOutput o1 = restored.model.forward(probe, false, r1);
  const GraphOutput o2 = reloaded.model.forward(probe, false, r2);
  auto same = [](const Tensor& x, const Tensor& y) {
    return x.size() == y.size() &&
           std::memcmp(x.values().data(), y.values().data(), x.size() * sizeof(double)) == 0;
  };
  const bool forward_same = same(o1.probs.back(), o2.probs.back()) &&
                            same(o1.edges.back(), o2.edges.back()) &&
                            same(o1.nodes.front(), o2.nodes.front());
  const auto recs = evaluate(ra.manifest.checkpoints.back());
  const bool final_same = recs.front().scores.os == ra.final_scores.os &&
                          recs.front().scores.os_star == ra.final_scores.os_star &&
                          recs.front().scores.all == ra.final_scores.all;
  fs::remove_all(a);
  fs::remove_all(b);
  return {csv_same && store_same && forward_same && final_same,
          std::string("metrics CSV ") + (csv_same ? "identical" : "differs") + ", checkpoints " +
              (store_same ? "identical" : "differ") + ", reloaded forward " +
              (forward_same ? "bit-exact" : "differs") + ", re-evaluation " +
              (final_same ? "matches" : "differs")};
}

}  // namespace

int main() {
  AblationSummary summary;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"edge normalization invariants", edge_normalization},
      {"progressive bookkeeping", progressive_bookkeeping},
      {"pseudo-labeler oracle equivalence", oracle_equivalence},
      {"metric identity", metric_identity},
      {"open-set bound enumeration", ouda_bound},
      {"subset tightness", subset_tightness},
      {"ablation direction", [&] { return ablation_direction(summary); }},
      {"chance floor and convergence", [&] { return chance_floor(summary); }},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %s: %s (%s; %.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
