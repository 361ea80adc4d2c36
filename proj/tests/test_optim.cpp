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

#include "pgl/optim.hpp"
#include "pgl/rng.hpp"

using namespace pgl;

TEST(Adam, OneStepDecreasesConvexBowl) {
  Tensor x = Tensor::from({1, 1}, {1.0}, true);
  Adam opt({{"x", x}});
  backward(mul(x, x));
  opt.step(0.1, 0.0);
  EXPECT_LT(std::abs(x.values()[0]), 1.0);
}

TEST(Adam, ZeroGradientZeroDecayIsFixedPoint) {
  Tensor x = Tensor::from({1, 2}, {0.3, -0.7}, true);
  Adam opt({{"x", x}});
  x.mutable_grad();
  x.zero_grad();
  opt.step(0.1, 0.0);
  EXPECT_EQ(x.values()[0], 0.3);
  EXPECT_EQ(x.values()[1], -0.7);
}

TEST(Adam, QuadraticReachesMinimum) {
  Tensor x = Tensor::from({1, 2}, {1.5, -2.0}, true);
  const Tensor scales = Tensor::from({1, 2}, {1.0, 3.0});
  Adam opt({{"x", x}});
  double loss = 1.0;
  for (int i = 0; i < 200; ++i) {
    Tensor l = sum(mul(scales, mul(x, x)));
    loss = l.item();
    backward(l);
    opt.step(0.05, 0.0);
  }
  Tensor l = sum(mul(scales, mul(x, x)));
  EXPECT_LT(l.item(), 1e-6) << "start loss " << loss;
}

TEST(Adam, DecoupledWeightDecayShrinksWithoutGradient) {
  Tensor x = Tensor::from({1, 1}, {2.0}, true);
  Adam opt({{"x", x}});
  x.mutable_grad();
  x.zero_grad();
  opt.step(0.1, 0.5);
  EXPECT_DOUBLE_EQ(x.values()[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Adam, SkipsParametersWithoutGradient) {
  Tensor a = Tensor::from({1, 1}, {1.0}, true);
  Tensor b = Tensor::from({1, 1}, {1.0}, true);
  Adam opt({{"a", a}, {"b", b}});
  backward(mul(a, a));
  opt.step(0.1, 0.1);
  EXPECT_LT(a.values()[0], 1.0);
  EXPECT_EQ(b.values()[0], 1.0);
  EXPECT_FALSE(a.has_grad());
}

TEST(Rng, NamedStreamsAreIndependent) {
  EXPECT_NE(derive_seed(1, "data"), derive_seed(1, "init"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(2, "data"));
  EXPECT_EQ(derive_seed(5, "episodes"), derive_seed(5, "episodes"));
}

TEST(Rng, StateRoundTrip) {
  Rng a(42, "x");
  a.uniform();
  Rng b(0);
  b.load_state(a.save_state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}
