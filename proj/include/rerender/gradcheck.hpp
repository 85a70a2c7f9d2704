// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rerender/tensor.hpp"

namespace rerender {

// Central finite differences vs reverse-mode gradients, 64-bit only.
// Each check projects the op output onto a fixed random direction to get a
// scalar, then compares d(scalar)/d(input element) both ways.

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0;
  double tolerance = 1e-3;
  bool pass = false;
};

// fn maps inputs to the op output (any shape). check[i] selects which inputs
// to differentiate against.
double finite_difference_max_err(
    const std::function<TensorD(const std::vector<TensorD>&)>& fn,
    std::vector<TensorD> inputs, const std::vector<bool>& check, uint64_t seed,
    double step = 1e-4);

// Runs the whole differentiable-op suite (conv, pooling, resize, warp,
// normalization, activations, composition ops, losses) over seeds_per_op
// seeds each. Results are one entry per (op, seed).
std::vector<GradCheckCase> run_grad_checks(int seeds_per_op = 5, double tolerance = 1e-3);

}  // namespace rerender
