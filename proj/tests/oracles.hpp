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

// Reference computations used by the tests. They share no code with the
// library beyond plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "pgl/boundlab.hpp"
#include "pgl/tensor.hpp"

namespace oracle {

// Relative error with an absolute floor for tiny gradients.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

// Central differences of `f` with respect to every entry of `param`.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, pgl::Tensor param,
                                            double h = 1e-5) {
  auto w = param.mutable_values();
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + h;
    const double up = f();
    w[i] = keep - h;
    const double down = f();
    w[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

struct Assignment {
  std::set<std::size_t> unknown;
  std::set<std::size_t> known;
};

// Brute-force ranked thresholding: each unlabeled id gets its rank by counting
// the unlabeled ids that precede it under (confidence, id); ranks below
// q_unknown go to unknown, ranks at or above pool - q_known go to known.
inline Assignment rank_threshold(const std::vector<double>& conf,
                                 const std::set<std::size_t>& labeled, std::size_t q_unknown,
                                 std::size_t q_known) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < conf.size(); ++i)
    if (!labeled.count(i)) pool.push_back(i);
  const std::size_t n = pool.size();
  q_unknown = std::min(q_unknown, n);
  q_known = std::min(q_known, n - q_unknown);
  Assignment out;
  for (auto i : pool) {
    std::size_t rank = 0;
    for (auto j : pool) {
      if (conf[j] < conf[i] || (conf[j] == conf[i] && j < i)) ++rank;
    }
    if (rank < q_unknown) out.unknown.insert(i);
    if (rank >= n - q_known) out.known.insert(i);
  }
  return out;
}

struct Scores {
  double all, os, os_star, unk;
};

// Direct counting, every class assumed present.
inline Scores open_set_scores(const std::vector<int>& truth, const std::vector<int>& pred, int C) {
  std::vector<double> hit(static_cast<std::size_t>(C + 2), 0.0),
      tot(static_cast<std::size_t>(C + 2), 0.0);
  double correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tot[static_cast<std::size_t>(truth[i])] += 1;
    if (truth[i] == pred[i]) {
      hit[static_cast<std::size_t>(truth[i])] += 1;
      correct += 1;
    }
  }
  double known = 0;
  for (int c = 1; c <= C; ++c)
    known += hit[static_cast<std::size_t>(c)] / tot[static_cast<std::size_t>(c)];
  const double unk = hit[static_cast<std::size_t>(C + 1)] / tot[static_cast<std::size_t>(C + 1)];
  return {correct / static_cast<double>(truth.size()), (known + unk) / (C + 1), known / C, unk};
}

// Open-set bound slack for every hypothesis, recomputed from the joint masses.
inline std::vector<double> ouda_slacks(const pgl::bounds::FiniteInstance& inst) {
  const std::size_t X = inst.num_points;
  const int C = inst.num_classes;
  auto qs = [&](std::size_t x, int y) { return inst.target_mass[x * (C + 1) + (y - 1)]; };
  auto ps = [&](std::size_t x, int y) { return inst.source_mass[x * C + (y - 1)]; };
  std::vector<double> pi_t(static_cast<std::size_t>(C + 2), 0.0);
  for (std::size_t x = 0; x < X; ++x)
    for (int y = 1; y <= C + 1; ++y) pi_t[static_cast<std::size_t>(y)] += qs(x, y);
  const double pu = pi_t[static_cast<std::size_t>(C + 1)];

  auto rs = [&](const pgl::bounds::Hypothesis& h) {
    double r = 0;
    for (std::size_t x = 0; x < X; ++x)
      for (int y = 1; y <= C; ++y)
        if (h[x] != y) r += ps(x, y);
    return r;
  };
  // Known part of the target risk (the R_t* term) and the unknown conditional risk.
  auto rt_known = [&](const pgl::bounds::Hypothesis& h) {
    double r = 0;
    for (std::size_t x = 0; x < X; ++x)
      for (int y = 1; y <= C; ++y)
        if (h[x] != y) r += qs(x, y);
    return r;
  };
  auto rt_unknown_cond = [&](const pgl::bounds::Hypothesis& h) {
    if (pu <= 0) return 0.0;
    double r = 0;
    for (std::size_t x = 0; x < X; ++x)
      if (h[x] != C + 1) r += qs(x, C + 1);
    return r / pu;
  };
  std::vector<double> px(X, 0.0), qx(X, 0.0);
  double known_mass = 1.0 - pu;
  for (std::size_t x = 0; x < X; ++x) {
    for (int y = 1; y <= C; ++y) {
      px[x] += ps(x, y);
      qx[x] += qs(x, y) / known_mass;
    }
  }
  double disc = 0;
  for (const auto& a : inst.hypotheses)
    for (const auto& b : inst.hypotheses) {
      double ep = 0, eq = 0;
      for (std::size_t x = 0; x < X; ++x)
        if (a[x] != b[x]) {
          ep += px[x];
          eq += qx[x];
        }
      disc = std::max(disc, std::abs(ep - eq));
    }
  double lambda = std::numeric_limits<double>::infinity();
  for (const auto& h : inst.hypotheses) lambda = std::min(lambda, rs(h) + rt_known(h) / known_mass);

  std::vector<double> out;
  for (const auto& h : inst.hypotheses) {
    double rt = rt_known(h) + pu * rt_unknown_cond(h);
    const double lhs = rt / (1.0 - pu);
    const double rhs = rs(h) + disc + lambda + pu / (1.0 - pu) * rt_unknown_cond(h);
    out.push_back(rhs - lhs);
  }
  return out;
}

}  // namespace oracle
