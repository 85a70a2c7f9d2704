// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "rerender/gradcheck.hpp"
#include "rerender/ops.hpp"
#include "rerender/rng.hpp"

using namespace rerender;

TEST_CASE("finite differences agree for every differentiable op") {
  const auto results = run_grad_checks(/*seeds_per_op=*/5, /*tolerance=*/1e-3);
  CHECK(results.size() > 0);
  for (const auto& r : results) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
  }
}

TEST_CASE("conv weight gradient is tight against finite differences") {
  Rng rng(99);
  TensorD x = TensorD::zeros({1, 2, 5, 5});
  for (auto& v : x.vec()) v = rng.uniform(-1, 1);
  TensorD w = TensorD::zeros({2, 2, 3, 3});
  for (auto& v : w.vec()) v = rng.uniform(-1, 1);
  TensorD b = TensorD::zeros({1, 2, 1, 1});

  const double err = finite_difference_max_err(
      [](const std::vector<TensorD>& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
      {x, w, b}, {false, true, false}, 123);
  CHECK(err < 1e-4);
}

TEST_CASE("grid_sample flow gradient on a 4x4 input") {
  Rng rng(77);
  TensorD x = TensorD::zeros({1, 1, 4, 4});
  for (auto& v : x.vec()) v = rng.uniform(0, 1);
  TensorD flow = TensorD::zeros({1, 2, 4, 4});
  for (auto& v : flow.vec()) v = rng.uniform(-0.2, 0.2);

  const double err = finite_difference_max_err(
      [](const std::vector<TensorD>& in) { return grid_sample(in[0], in[1]); }, {x, flow},
      {false, true}, 321);
  CHECK(err < 1e-3);
}

TEST_CASE("composite conv -> instance_norm -> relu chain") {
  Rng rng(55);
  TensorD x = TensorD::zeros({1, 2, 6, 6});
  for (auto& v : x.vec()) v = rng.uniform(-1, 1);
  TensorD w = TensorD::zeros({3, 2, 3, 3});
  for (auto& v : w.vec()) v = rng.uniform(-1, 1);
  TensorD b = TensorD::zeros({1, 3, 1, 1});
  for (auto& v : b.vec()) v = rng.uniform(-0.1, 0.1);

  const double err = finite_difference_max_err(
      [](const std::vector<TensorD>& in) {
        return relu(instance_norm(conv2d(in[0], in[1], in[2], 1, 1), 1e-5));
      },
      {x, w, b}, {true, true, true}, 555);
  CHECK(err < 1e-3);
}
