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

#include "oracles.hpp"
#include "pgl/evalmetrics.hpp"
#include "pgl/rng.hpp"

using namespace pgl;

namespace {

// Random labelling where every class 1..C+1 appears in the truth.
std::pair<std::vector<Label>, std::vector<Label>> random_labels(Rng& rng, int C, std::size_t n) {
  std::vector<Label> truth, pred;
  for (int c = 1; c <= C + 1; ++c) truth.push_back(c);
  while (truth.size() < n)
    truth.push_back(static_cast<Label>(1 + rng.index(static_cast<std::size_t>(C + 1))));
  for (auto y : truth) {
    pred.push_back(rng.bernoulli(0.6)
                       ? y
                       : static_cast<Label>(1 + rng.index(static_cast<std::size_t>(C + 1))));
  }
  return {truth, pred};
}

}  // namespace

TEST(Metrics, WorkedExample) {
  const std::vector<Label> truth{1, 1, 2, 3}, pred{1, 2, 2, 3};
  const OpenSetScores s = score(truth, pred, 2);
  EXPECT_DOUBLE_EQ(s.all, 0.75);
  EXPECT_DOUBLE_EQ(s.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(s.per_class[1], 1.0);
  EXPECT_DOUBLE_EQ(s.per_class[2], 1.0);
  EXPECT_NEAR(s.os, 0.8333, 1e-4);
  EXPECT_DOUBLE_EQ(s.os, 2.5 / 3.0);
  EXPECT_DOUBLE_EQ(s.os_star, 0.75);
  EXPECT_DOUBLE_EQ(s.acc_unknown, 1.0);
}

TEST(Metrics, MeanOfPerClassAccuracies) {
  // Per-class accuracies 1.0, 0.5 and 0.0 for the unknown class.
  const std::vector<Label> truth{1, 2, 2, 3}, pred{1, 2, 1, 1};
  const OpenSetScores s = score(truth, pred, 2);
  EXPECT_DOUBLE_EQ(s.os, 0.5);
  EXPECT_DOUBLE_EQ(s.os_star, 0.75);
  EXPECT_TRUE(identity_check(s, 2));
}

TEST(Metrics, PerfectPrediction) {
  const std::vector<Label> truth{1, 2, 3, 4, 4, 1};
  const OpenSetScores s = score(truth, truth, 3);
  EXPECT_EQ(s.all, 1.0);
  EXPECT_EQ(s.os, 1.0);
  EXPECT_EQ(s.os_star, 1.0);
}

TEST(Metrics, IdentityWithEqualTerms) {
  // Every class, unknown included, at accuracy one half.
  const std::vector<Label> truth{1, 1, 2, 2, 3, 3}, pred{1, 2, 2, 3, 3, 1};
  const OpenSetScores s = score(truth, pred, 2);
  EXPECT_DOUBLE_EQ(s.os, s.os_star);
  EXPECT_TRUE(identity_check(s, 2));
}

TEST(Metrics, RandomMatricesAgreeWithCountingOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int C = 1 + static_cast<int>(rng.index(8));
    const auto [truth, pred] =
        random_labels(rng, C, static_cast<std::size_t>(C + 1) + rng.index(200));
    const OpenSetScores s = score(truth, pred, C);
    const oracle::Scores o = oracle::open_set_scores(truth, pred, C);
    ASSERT_TRUE(identity_check(s, C)) << "trial " << trial;
    EXPECT_NEAR(s.all, o.all, 1e-12);
    EXPECT_NEAR(s.os, o.os, 1e-12);
    EXPECT_NEAR(s.os_star, o.os_star, 1e-12);
    EXPECT_NEAR(s.acc_unknown, o.unk, 1e-12);
  }
}

TEST(Metrics, RelabelingKnownClassesLeavesScores) {
  Rng rng(5);
  const auto [truth, pred] = random_labels(rng, 4, 300);
  const std::vector<Label> perm{0, 3, 1, 4, 2, 5};  // fixes 5 = unknown
  std::vector<Label> t2, p2;
  for (auto y : truth) t2.push_back(perm[static_cast<std::size_t>(y)]);
  for (auto y : pred) p2.push_back(perm[static_cast<std::size_t>(y)]);
  const OpenSetScores a = score(truth, pred, 4), b = score(t2, p2, 4);
  EXPECT_NEAR(a.os, b.os, 1e-12);
  EXPECT_NEAR(a.os_star, b.os_star, 1e-12);
  EXPECT_NEAR(a.all, b.all, 1e-12);
}

TEST(Metrics, DuplicatingSamplesLeavesScores) {
  Rng rng(6);
  const auto [truth, pred] = random_labels(rng, 3, 101);
  std::vector<Label> t3, p3;
  for (int k = 0; k < 3; ++k) {
    t3.insert(t3.end(), truth.begin(), truth.end());
    p3.insert(p3.end(), pred.begin(), pred.end());
  }
  const OpenSetScores a = score(truth, pred, 3), b = score(t3, p3, 3);
  EXPECT_NEAR(a.all, b.all, 1e-12);
  EXPECT_NEAR(a.os, b.os, 1e-12);
  EXPECT_NEAR(a.os_star, b.os_star, 1e-12);
}

TEST(Metrics, AbsentClassExcludedWithWarning) {
  const std::vector<Label> truth{1, 1, 3}, pred{1, 2, 3};
  const OpenSetScores s = score(truth, pred, 2);
  EXPECT_TRUE(std::isnan(s.per_class[1]));
  EXPECT_DOUBLE_EQ(s.os_star, 0.5);
  EXPECT_DOUBLE_EQ(s.os, 0.75);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find('2'), std::string::npos);
}

TEST(Metrics, ConfusionMatrixCounts) {
  const std::vector<Label> truth{1, 1, 2, 3}, pred{1, 2, 2, 3};
  ConfusionMatrix cm(truth, pred, 2);
  EXPECT_EQ(cm.total(), 4u);
  EXPECT_EQ(cm.at(1, 2), 1u);
  EXPECT_EQ(cm.row_total(1), 2u);
  EXPECT_THROW(cm.add(4, 1), std::invalid_argument);
  EXPECT_THROW(cm.add(0, 1), std::invalid_argument);
  const std::vector<Label> shorter{1};
  EXPECT_THROW(ConfusionMatrix(truth, shorter, 2), std::invalid_argument);
}
