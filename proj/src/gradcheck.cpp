// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/gradcheck.hpp"

#include <cmath>

#include "rerender/losses.hpp"
#include "rerender/ops.hpp"
#include "rerender/rng.hpp"

namespace rerender {

namespace {

TensorD random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t = TensorD::zeros(s);
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

double projected_scalar(const TensorD& out, const std::vector<double>& proj) {
  double acc = 0;
  for (size_t i = 0; i < out.vec().size(); ++i) acc += out.vec()[i] * proj[i];
  return acc;
}

}  // namespace

double finite_difference_max_err(
    const std::function<TensorD(const std::vector<TensorD>&)>& fn,
    std::vector<TensorD> inputs, const std::vector<bool>& check, uint64_t seed,
    double step) {
  // Fixed projection direction makes the scalar sensitive to every output.
  Rng proj_rng = Rng::derive(seed, 0x9d0f);
  TensorD probe = fn(inputs);
  std::vector<double> proj(probe.vec().size());
  for (auto& v : proj) v = proj_rng.uniform(-1.0, 1.0);

  // Analytic pass.
  for (size_t i = 0; i < inputs.size(); ++i)
    if (check[i]) inputs[i].set_requires_grad(true);
  TensorD out = fn(inputs);
  TensorD proj_t = TensorD::from_data(out.shape(), proj);
  TensorD loss = sum_all(mul(out, proj_t));
  backward(loss);

  double max_err = 0;
  NoGradGuard no_grad;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!check[i]) continue;
    RR_CHECK(inputs[i].has_grad(), "gradcheck input " << i << " received no gradient");
    for (size_t e = 0; e < inputs[i].vec().size(); ++e) {
      const double saved = inputs[i].vec()[e];
      inputs[i].vec()[e] = saved + step;
      const double up = projected_scalar(fn(inputs), proj);
      inputs[i].vec()[e] = saved - step;
      const double dn = projected_scalar(fn(inputs), proj);
      inputs[i].vec()[e] = saved;
      const double numeric = (up - dn) / (2 * step);
      const double analytic = inputs[i].grad()[e];
      const double err =
          std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

std::vector<GradCheckCase> run_grad_checks(int seeds_per_op, double tolerance) {
  std::vector<GradCheckCase> results;

  auto run = [&](const std::string& name,
                 const std::function<TensorD(const std::vector<TensorD>&)>& fn,
                 const std::function<std::vector<TensorD>(Rng&)>& make_inputs,
                 const std::vector<bool>& check) {
    for (int s = 0; s < seeds_per_op; ++s) {
      Rng rng = Rng::derive(1234, std::hash<std::string>{}(name), static_cast<uint64_t>(s));
      GradCheckCase c;
      c.name = name + "/seed" + std::to_string(s);
      c.tolerance = tolerance;
      c.max_rel_err = finite_difference_max_err(fn, make_inputs(rng), check,
                                                static_cast<uint64_t>(s) + 17);
      c.pass = c.max_rel_err < tolerance;
      results.push_back(c);
    }
  };

  run(
      "conv2d",
      [](const std::vector<TensorD>& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({2, 2, 5, 4}, rng),
                                    random_tensor({3, 2, 3, 3}, rng),
                                    random_tensor({1, 3, 1, 1}, rng)};
      },
      {true, true, true});

  run(
      "conv2d_stride2",
      [](const std::vector<TensorD>& in) { return conv2d(in[0], in[1], in[2], 2, 1); },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 3, 6, 4}, rng),
                                    random_tensor({4, 3, 3, 3}, rng),
                                    random_tensor({1, 4, 1, 1}, rng)};
      },
      {true, true, true});

  run(
      "avg_pool2", [](const std::vector<TensorD>& in) { return avg_pool2(in[0]); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({2, 3, 4, 6}, rng)}; },
      {true});

  run(
      "bilinear_resize_up",
      [](const std::vector<TensorD>& in) { return bilinear_resize(in[0], 7, 9); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({1, 2, 4, 5}, rng)}; },
      {true});

  run(
      "bilinear_resize_down",
      [](const std::vector<TensorD>& in) { return bilinear_resize(in[0], 3, 4); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({1, 2, 6, 8}, rng)}; },
      {true});

  run(
      "grid_sample",
      [](const std::vector<TensorD>& in) { return grid_sample(in[0], in[1]); },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 2, 5, 4}, rng),
                                    random_tensor({1, 2, 5, 4}, rng, -0.3, 0.3)};
      },
      {true, true});

  run(
      "instance_norm",
      [](const std::vector<TensorD>& in) { return instance_norm(in[0], 1e-5); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({2, 2, 4, 5}, rng)}; },
      {true});

  run(
      "relu", [](const std::vector<TensorD>& in) { return relu(in[0]); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({1, 3, 4, 4}, rng)}; },
      {true});

  run(
      "sigmoid", [](const std::vector<TensorD>& in) { return sigmoid(in[0]); },
      [](Rng& rng) { return std::vector<TensorD>{random_tensor({1, 3, 4, 4}, rng, -3, 3)}; },
      {true});

  run(
      "concat_channels",
      [](const std::vector<TensorD>& in) { return concat_channels(in[0], in[1]); },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 2, 3, 4}, rng),
                                    random_tensor({1, 3, 3, 4}, rng)};
      },
      {true, true});

  run(
      "compose_clamped",
      [](const std::vector<TensorD>& in) { return clamp01(add(in[0], in[1])); },
      [](Rng& rng) {
        // Away from the clamp kinks so central differences stay two-sided.
        return std::vector<TensorD>{random_tensor({1, 3, 4, 4}, rng, 0.1, 0.45),
                                    random_tensor({1, 3, 4, 4}, rng, 0.1, 0.45)};
      },
      {true, true});

  run(
      "mul_blend",
      [](const std::vector<TensorD>& in) {
        return add(mul_scalar(in[0], 0.1), mul_scalar(in[1], 0.9));
      },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 2, 3, 3}, rng),
                                    random_tensor({1, 2, 3, 3}, rng)};
      },
      {true, true});

  run(
      "coarse_loss",
      [](const std::vector<TensorD>& in) { return coarse_loss(in[0], in[1], in[2], in[3]); },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0),
                                    random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0),
                                    random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0),
                                    random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0)};
      },
      {true, true, false, false});

  {
    // Shared fixed-seed extractor for the perceptual-loss checks.
    static PerceptualExtractorT<double> extractor(4242);
    run(
        "reconstruction_loss_vgg",
        [](const std::vector<TensorD>& in) {
          auto parts = reconstruction_loss(in[0], in[1], extractor);
          return add(parts.vgg, parts.img);
        },
        [](Rng& rng) {
          return std::vector<TensorD>{random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                      random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0)};
        },
        {true, false});
  }

  run(
      "warp_loss_early",
      [](const std::vector<TensorD>& in) {
        return warp_loss(in[0], in[1], in[2], in[3], /*epoch=*/7).total;
      },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                    random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                    random_tensor({1, 2, 2, 2}, rng, -0.2, 0.2),
                                    random_tensor({1, 2, 2, 2}, rng, -0.2, 0.2)};
      },
      {false, false, false, true});

  run(
      "warp_loss_late",
      [](const std::vector<TensorD>& in) {
        return warp_loss(in[0], in[1], in[2], in[3], /*epoch=*/20).total;
      },
      [](Rng& rng) {
        return std::vector<TensorD>{random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                    random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0),
                                    random_tensor({1, 2, 2, 2}, rng, -0.2, 0.2),
                                    random_tensor({1, 2, 2, 2}, rng, -0.2, 0.2)};
      },
      {true, false, false, true});

  return results;
}

}  // namespace rerender
