// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rerender/ops.hpp"
#include "rerender/rng.hpp"
#include "rerender/tensor.hpp"

namespace rerender {

// Named, trainable tensor. Names are dotted paths stable across save/load.
struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParamRefs = std::vector<std::pair<std::string, Tensor>>;

// Kaiming-uniform fan-in init for conv weights.
Tensor kaiming_conv_weight(int out_ch, int in_ch, int k, Rng& rng);

struct Conv2dLayer {
  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (1, out, 1, 1), zero-initialized
  int stride = 1;
  int padding = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int in_ch, int out_ch, int k, int stride, int padding, Rng& rng);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, ParamRefs& out) const;
  void zero_init();
};

// 3x3 conv + instance norm + ReLU, stride 1.
struct ConvBlock {
  Conv2dLayer conv;

  ConvBlock() = default;
  ConvBlock(int in_ch, int out_ch, int k, Rng& rng)
      : conv(in_ch, out_ch, k, 1, k / 2, rng) {}

  Tensor forward(const Tensor& x) const { return relu(instance_norm(conv.forward(x))); }
  void collect(const std::string& prefix, ParamRefs& out) const { conv.collect(prefix, out); }
};

// ConvBlock followed by 2x2 average pooling.
struct DownBlock {
  ConvBlock block;

  DownBlock() = default;
  DownBlock(int in_ch, int out_ch, Rng& rng) : block(in_ch, out_ch, 3, rng) {}

  Tensor forward(const Tensor& x) const { return avg_pool2(block.forward(x)); }
  void collect(const std::string& prefix, ParamRefs& out) const { block.collect(prefix, out); }
};

// x2 bilinear upsample followed by a 3x3 conv.
struct UpBlock {
  Conv2dLayer conv;

  UpBlock() = default;
  UpBlock(int in_ch, int out_ch, Rng& rng) : conv(in_ch, out_ch, 3, 1, 1, rng) {}

  Tensor forward(const Tensor& x) const {
    const Shape s = x.shape();
    return conv.forward(bilinear_resize(x, s.h * 2, s.w * 2));
  }
  void collect(const std::string& prefix, ParamRefs& out) const { conv.collect(prefix, out); }
};

// Adam with decoupled weight decay. Moments are keyed by parameter name so
// optimizer state survives checkpointing.
class AdamOptimizer {
 public:
  struct Config {
    double lr = 5e-5;
    double weight_decay = 3e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  AdamOptimizer() = default;
  AdamOptimizer(ParamRefs params, Config cfg);

  // Applies one update from accumulated gradients; requires every managed
  // parameter to carry a gradient.
  void step();
  void zero_grad();

  // Global gradient-norm clipping; returns the pre-clip norm.
  double clip_grad_norm(double max_norm);

  int64_t step_count() const { return step_count_; }
  const Config& config() const { return cfg_; }

  struct Slot {
    std::string name;
    std::vector<float> m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const ParamRefs& params() const { return params_; }
  void set_step_count(int64_t t) { step_count_ = t; }

 private:
  ParamRefs params_;
  std::vector<Slot> slots_;
  Config cfg_;
  int64_t step_count_ = 0;
};

}  // namespace rerender
