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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "pgl/progressive.hpp"
#include "pgl/rng.hpp"

using namespace pgl;

namespace {

Tensor random_logits(Rng& rng, std::size_t n, std::size_t c) {
  std::vector<double> v(n * c);
  for (auto& x : v) x = 2.0 * rng.normal();
  return Tensor::from({n, c}, std::move(v));
}

Tensor random_probs(Rng& rng, std::size_t n, std::size_t c) {
  return softmax_rows(random_logits(rng, n, c));
}

// Confidence rows with max = conf[i] on class 1.
Tensor probs_with_confidence(const std::vector<double>& conf, std::size_t classes) {
  std::vector<double> v;
  for (double p : conf) {
    v.push_back(p);
    for (std::size_t c = 1; c < classes; ++c)
      v.push_back((1.0 - p) / static_cast<double>(classes - 1));
  }
  return Tensor::from({conf.size(), classes}, v);
}

std::vector<double> max_probs(const Tensor& probs) {
  std::vector<double> out;
  for (const auto& c : confidences(probs)) out.push_back(c.value);
  return out;
}

std::set<std::size_t> keys_of(const auto& map) {
  std::set<std::size_t> s;
  for (const auto& [k, v] : map) s.insert(k);
  return s;
}

}  // namespace

TEST(Progressive, FirstStepQuotas) {
  ProgressiveConfig cfg{0.05, 0.6, 1000};
  Rng rng(1);
  const PseudoLabelStore s = pseudo_label_step(random_probs(rng, 1000, 4), {}, cfg);
  EXPECT_EQ(s.unknown.size(), 30u);
  EXPECT_EQ(s.known.size(), 20u);
  EXPECT_EQ(s.step, 1u);
}

TEST(Progressive, ExtremesAssignedFirst) {
  ProgressiveConfig cfg{0.4, 0.5, 5};
  ASSERT_EQ(cfg.unknown_quota(1), 1u);
  ASSERT_EQ(cfg.known_quota(1), 1u);
  const PseudoLabelStore s =
      pseudo_label_step(probs_with_confidence({0.9, 0.1, 0.5, 0.95, 0.2}, 10), {}, cfg);
  EXPECT_EQ(keys_of(s.unknown), (std::set<std::size_t>{1}));
  EXPECT_EQ(keys_of(s.known), (std::set<std::size_t>{3}));
  EXPECT_EQ(s.known.at(3).label, 1);
  EXPECT_DOUBLE_EQ(s.known.at(3).confidence, 0.95);
}

TEST(Progressive, FinalStepLabelsEverything) {
  for (double beta : {0.0, 0.3, 0.6, 0.85}) {
    ProgressiveConfig cfg{0.05, beta, 777};
    Rng rng(2);
    PseudoLabelStore s;
    for (std::size_t m = 1; m <= cfg.total_steps(); ++m) {
      s = pseudo_label_step(random_probs(rng, 777, 5), s, cfg);
    }
    EXPECT_EQ(s.size(), 777u);
    EXPECT_EQ(s.unknown.size(), round_count(beta * 777.0));
  }
}

TEST(Progressive, CumulativeQuotasAndMonotonicity) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = 1.0 / static_cast<double>(2 + rng.index(19));
    const double beta = rng.uniform(0.05, 0.9);
    const std::size_t n = 20 + rng.index(400);
    ProgressiveConfig cfg{alpha, beta, n};
    PseudoLabelStore s;
    for (std::size_t m = 1; m <= cfg.total_steps(); ++m) {
      const PseudoLabelStore next = pseudo_label_step(random_probs(rng, n, 3), s, cfg);
      for (const auto& [id, e] : s.known) {
        ASSERT_TRUE(next.known.count(id));
        EXPECT_EQ(next.known.at(id).label, e.label);
        EXPECT_EQ(next.known.at(id).step, e.step);
      }
      for (const auto& [id, e] : s.unknown) ASSERT_TRUE(next.unknown.count(id));
      for (const auto& [id, e] : next.known) EXPECT_FALSE(next.unknown.count(id));
      if (m < cfg.total_steps()) {
        const double md = static_cast<double>(m), nd = static_cast<double>(n);
        EXPECT_EQ(next.unknown.size(), round_count(beta * alpha * md * nd));
        EXPECT_EQ(next.known.size(), round_count((1.0 - beta) * alpha * md * nd));
      }
      s = next;
    }
    EXPECT_EQ(s.size(), n);
  }
}

TEST(Progressive, ThresholdsNeverOverlap) {
  for (double alpha : {0.05, 0.1, 0.2, 0.25}) {
    for (double beta : {0.05, 0.5, 0.85, 0.95}) {
      ProgressiveConfig cfg{alpha, beta, 1000};
      for (std::size_t m = 0; m < cfg.total_steps(); ++m) {
        EXPECT_LT(cfg.unknown_threshold(m), cfg.known_threshold(m));
      }
    }
  }
}

TEST(Progressive, StoredUnknownStaysUnknown) {
  PseudoLabelStore s;
  s.unknown[0] = {1, 0.2};
  s.known[1] = {3, 1, 0.9};
  const Tensor probs = probs_with_confidence({0.99, 0.4, 0.6}, 3);
  const std::vector<std::size_t> ids{0, 1, 2};
  const auto labels = predict_openset(probs, ids, &s, 0.5, 0.1);
  EXPECT_EQ(labels[0], 4);
  EXPECT_EQ(labels[1], 3);
}

TEST(Progressive, ZeroBetaNeverPredictsUnknown) {
  Rng rng(4);
  const Tensor probs = random_probs(rng, 200, 4);
  ProgressiveConfig cfg{0.1, 0.0, 200};
  PseudoLabelStore s;
  for (std::size_t m = 1; m <= cfg.total_steps(); ++m) {
    s = pseudo_label_step(probs, s, cfg);
    EXPECT_TRUE(s.unknown.empty());
  }
  std::vector<std::size_t> ids(200);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (Label y : predict_openset(probs, ids, &s, 0.0, 1.0)) EXPECT_LE(y, 4);
  for (Label y : predict_openset(probs, ids, nullptr, 0.0, 1.0)) EXPECT_LE(y, 4);
}

TEST(Progressive, StepAgreesWithRankOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 50;
    ProgressiveConfig cfg{0.1, rng.uniform(0.1, 0.8), n};
    PseudoLabelStore s;
    for (std::size_t m = 1; m <= 4; ++m) {
      // Coarse confidences force ties.
      std::vector<double> conf(n);
      for (auto& c : conf) c = 0.3 + 0.1 * static_cast<double>(rng.index(5));
      const Tensor probs = probs_with_confidence(conf, 4);
      const auto before = s;
      s = pseudo_label_step(probs, s, cfg);
      std::set<std::size_t> labeled = keys_of(before.known);
      for (auto id : keys_of(before.unknown)) labeled.insert(id);
      const auto expect = oracle::rank_threshold(max_probs(probs), labeled,
                                                 cfg.unknown_quota(m) - before.unknown.size(),
                                                 cfg.known_quota(m) - before.known.size());
      std::set<std::size_t> got_u, got_k;
      for (auto id : keys_of(s.unknown))
        if (!before.unknown.count(id)) got_u.insert(id);
      for (auto id : keys_of(s.known))
        if (!before.known.count(id)) got_k.insert(id);
      EXPECT_EQ(got_u, expect.unknown);
      EXPECT_EQ(got_k, expect.known);
    }
  }
}

TEST(Progressive, PredictionAgreesWithRankOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50;
    const Tensor probs = random_probs(rng, n, 4);
    const double beta = rng.uniform(0.1, 0.9), frac = rng.uniform(0.05, 1.0);
    const auto cut = static_cast<std::size_t>(std::floor(beta * frac * n + 0.5));
    const auto expect = oracle::rank_threshold(max_probs(probs), {}, cut, 0);
    const auto conf = confidences(probs);
    const auto labels = predict_openset(probs, {}, nullptr, beta, frac);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(labels[i], expect.unknown.count(i) ? 5 : conf[i].label) << "row " << i;
    }
  }
}

TEST(Progressive, LogitShiftLeavesAssignmentsUnchanged) {
  Rng rng(7);
  const Tensor logits = random_logits(rng, 300, 4);
  std::vector<double> shifted(logits.values().begin(), logits.values().end());
  for (auto& v : shifted) v += 3.0;
  ProgressiveConfig cfg{0.1, 0.4, 300};
  PseudoLabelStore a, b;
  for (std::size_t m = 1; m <= 5; ++m) {
    a = pseudo_label_step(softmax_rows(logits), a, cfg);
    b = pseudo_label_step(softmax_rows(Tensor::from({300, 4}, shifted)), b, cfg);
  }
  EXPECT_EQ(keys_of(a.unknown), keys_of(b.unknown));
  EXPECT_EQ(keys_of(a.known), keys_of(b.known));
  for (const auto& [id, e] : a.known) EXPECT_EQ(b.known.at(id).label, e.label);
}

TEST(Progressive, RejectsBadConfig) {
  Rng rng(8);
  const Tensor probs = random_probs(rng, 10, 3);
  EXPECT_THROW(pseudo_label_step(probs, {}, {0.0, 0.5, 10}), std::invalid_argument);
  EXPECT_THROW(pseudo_label_step(probs, {}, {0.1, 1.0, 10}), std::invalid_argument);
  EXPECT_THROW(pseudo_label_step(probs, {}, {0.1, 0.5, 11}), std::invalid_argument);
}

TEST(Progressive, ArgmaxTiesPickLowestClass) {
  const auto c = confidences(Tensor::from({1, 3}, {0.4, 0.4, 0.2}));
  EXPECT_EQ(c[0].label, 1);
}

TEST(Progressive, StoreCsv) {
  PseudoLabelStore s;
  s.known[2] = {1, 1, 0.75};
  s.unknown[0] = {1, 0.25};
  std::ostringstream out;
  write_store_csv(out, s, 4);
  EXPECT_EQ(out.str(),
            "id,assigned_step,kind,pseudo_label,confidence_at_assignment\n"
            "0,1,unknown,5,0.25\n"
            "2,1,known,1,0.75\n");
}
