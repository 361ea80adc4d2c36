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

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "pgl/boundlab.hpp"
#include "pgl/checkpoint.hpp"
#include "pgl/config.hpp"
#include "pgl/runner.hpp"

namespace {

using nlohmann::json;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file,
                    "JSON config file; missing fields use the reference problem");
    app->add_option("-s,--set", overrides, "Override a field, e.g. --set model.gnn_depth=2");
  }

  pgl::RunConfig load() const {
    json j = pgl::to_json(pgl::reference_config());
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw std::runtime_error("cannot open config " + file);
      j.merge_patch(json::parse(in));
      j = pgl::to_json(pgl::config_from_json(j));
    }
    for (const auto& o : overrides) pgl::apply_override(j, o);
    pgl::RunConfig c = pgl::config_from_json(j);
    c.validate();
    return c;
  }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    pgl::write_file_atomic(path, text);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_records(const std::vector<pgl::EvalRecord>& recs) {
  std::cout << "split,ALL,OS,OS_star,acc_unknown\n";
  for (const auto& r : recs) {
    std::printf("%s,%.10g,%.10g,%.10g,%.10g\n", r.split.c_str(), r.scores.all, r.scores.os,
                r.scores.os_star, r.scores.acc_unknown);
    for (const auto& w : r.scores.warnings) std::cerr << "warning: " << w << '\n';
  }
}

int run_bounds(std::size_t instances, std::uint64_t seed, const std::string& out_path) {
  namespace b = pgl::bounds;
  std::ostringstream report;
  b::write_report_header(report);
  std::size_t violations = 0;
  double min_slack = 1e300;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = seed + i;
    const b::FiniteInstance inst = b::random_instance(s);
    const b::OudaReport r = b::check_ouda_bound(inst);
    b::write_report_row(report, s, r.tightest);
    min_slack = std::min(min_slack, r.tightest.slack);
    const b::TightnessReport t = b::check_subset_tightness(inst);
    if (r.tightest.slack < -1e-12 || !t.source_holds || !t.openset_holds) {
      ++violations;
      std::cerr << "violation on instance " << s << '\n';
      b::write_instance(std::cerr, inst);
    }
  }
  write_output(out_path, report.str());
  std::cerr << instances << " instances, min slack " << min_slack << ", " << violations
            << " violations\n";
  return violations ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set domain adaptation lab with progressive graph learning"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg, train_cfg, ablate_cfg, embed_cfg;

  auto* gen = app.add_subcommand("generate", "Write a synthetic domain pair as CSV");
  gen_cfg.attach(gen);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "Output CSV (default stdout)");

  auto* tr = app.add_subcommand("train", "Train and write metrics, checkpoints and a manifest");
  train_cfg.attach(tr);
  std::string train_dir = "run";
  bool train_verbose = false;
  tr->add_option("-o,--out", train_dir, "Run directory");
  tr->add_flag("-v,--verbose", train_verbose, "Log every metrics row to stderr");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on its target splits");
  std::string ev_ckpt;
  ev->add_option("checkpoint", ev_ckpt, "Checkpoint file")->required();

  auto* ab = app.add_subcommand("ablate", "Run ablation variants over several seeds");
  ablate_cfg.attach(ab);
  std::string variants = "full,no_progressive,nll,no_gnn,no_mixup";
  std::string seeds = "1,2,3,4,5";
  std::string ab_out;
  bool ab_verbose = false;
  ab->add_option("--variants", variants, "Comma-separated variant names");
  ab->add_option("--seeds", seeds, "Comma-separated root seeds");
  ab->add_option("-o,--out", ab_out, "Summary CSV (default stdout)");
  ab->add_flag("-v,--verbose", ab_verbose, "Log each run");

  auto* bd = app.add_subcommand("bounds", "Check the adaptation bounds on random finite instances");
  std::size_t bd_n = 200;
  std::uint64_t bd_seed = 1;
  std::string bd_out;
  bd->add_option("-n,--instances", bd_n, "Number of instances");
  bd->add_option("--seed", bd_seed, "First instance seed");
  bd->add_option("-o,--out", bd_out, "Report CSV (default stdout)");

  auto* ed = app.add_subcommand("edges", "Dump the last-layer edge matrix of one graph");
  std::string ed_ckpt, ed_out;
  ed->add_option("checkpoint", ed_ckpt, "Checkpoint file")->required();
  ed->add_option("-o,--out", ed_out, "Output CSV (default stdout)");

  auto* em = app.add_subcommand("embed", "Dump a 2-D projection of backbone features");
  std::string em_ckpt, em_out;
  em->add_option("checkpoint", em_ckpt, "Checkpoint file (omit for an untrained model)");
  embed_cfg.attach(em);
  em->add_option("-o,--out", em_out, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const pgl::RunConfig c = gen_cfg.load();
      const pgl::PreparedData data = pgl::prepare_data(c);
      pgl::DomainPair pair = data.train;
      for (std::size_t i = 0; i < pair.target.size(); ++i)
        pair.target[i].label = data.train_truth[i];
      std::ostringstream out;
      pgl::write_domain_csv(out, pair);
      write_output(gen_out, out.str());
    } else if (*tr) {
      pgl::TrainOptions opts;
      opts.out_dir = train_dir;
      opts.verbose = train_verbose;
      const pgl::RunResult r = pgl::train(train_cfg.load(), opts);
      std::printf("status: %s\nOS %.4f OS* %.4f UNK %.4f ALL %.4f\n", r.manifest.status.c_str(),
                  r.final_scores.os, r.final_scores.os_star, r.final_scores.acc_unknown,
                  r.final_scores.all);
      return r.aborted ? 2 : 0;
    } else if (*ev) {
      print_records(pgl::evaluate(ev_ckpt));
    } else if (*ab) {
      std::vector<std::uint64_t> seed_list;
      for (const auto& s : split_list(seeds)) seed_list.push_back(std::stoull(s));
      const auto rows = pgl::ablate(ablate_cfg.load(), split_list(variants), seed_list, ab_verbose);
      std::ostringstream out;
      pgl::write_ablation_csv(out, rows);
      write_output(ab_out, out.str());
    } else if (*bd) {
      return run_bounds(bd_n, bd_seed, bd_out);
    } else if (*ed) {
      const pgl::RestoredRun run = pgl::restore(pgl::load_checkpoint(ed_ckpt));
      const pgl::RunConfig c = run.config.effective();
      const pgl::PreparedData data = pgl::prepare_data(c);
      std::ostringstream out;
      pgl::write_matrix_csv(out, pgl::final_edges(run.model, data.train, c.seed));
      write_output(ed_out, out.str());
    } else if (*em) {
      std::ostringstream out;
      if (em_ckpt.empty()) {
        const pgl::RunConfig c = embed_cfg.load().effective();
        const pgl::Model model(c.model, c.seed);
        pgl::write_embedding_csv(out, model, pgl::prepare_data(c));
      } else {
        const pgl::RestoredRun run = pgl::restore(pgl::load_checkpoint(em_ckpt));
        const pgl::RunConfig c = run.config.effective();
        pgl::write_embedding_csv(out, run.model, pgl::prepare_data(c));
      }
      write_output(em_out, out.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
