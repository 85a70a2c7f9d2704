// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/nn.hpp"

#include <cmath>

namespace rerender {

Tensor kaiming_conv_weight(int out_ch, int in_ch, int k, Rng& rng) {
  Tensor w = Tensor::zeros({out_ch, in_ch, k, k}, /*requires_grad=*/true);
  const double fan_in = static_cast<double>(in_ch) * k * k;
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : w.vec()) v = static_cast<float>(rng.uniform(-bound, bound));
  return w;
}

Conv2dLayer::Conv2dLayer(int in_ch, int out_ch, int k, int stride, int padding, Rng& rng)
    : weight(kaiming_conv_weight(out_ch, in_ch, k, rng)),
      bias(Tensor::zeros({1, out_ch, 1, 1}, /*requires_grad=*/true)),
      stride(stride),
      padding(padding) {}

void Conv2dLayer::collect(const std::string& prefix, ParamRefs& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

void Conv2dLayer::zero_init() {
  for (auto& v : weight.vec()) v = 0.f;
  for (auto& v : bias.vec()) v = 0.f;
}

AdamOptimizer::AdamOptimizer(ParamRefs params, Config cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.reserve(params_.size());
  for (auto& [name, t] : params_) {
    Slot s;
    s.name = name;
    s.m.assign(t.vec().size(), 0.f);
    s.v.assign(t.vec().size(), 0.f);
    slots_.push_back(std::move(s));
  }
}

void AdamOptimizer::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].second;
    RR_CHECK(t.has_grad(), "adam step with missing gradient for " << params_[p].first);
    Slot& s = slots_[p];
    float* w = t.data();
    const std::vector<float>& g = t.grad();
    for (size_t i = 0; i < g.size(); ++i) {
      s.m[i] = static_cast<float>(cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i]);
      s.v[i] = static_cast<float>(cfg_.beta2 * s.v[i] +
                                  (1.0 - cfg_.beta2) * static_cast<double>(g[i]) * g[i]);
      const double mh = s.m[i] / bc1;
      const double vh = s.v[i] / bc2;
      double upd = mh / (std::sqrt(vh) + cfg_.eps);
      upd += cfg_.weight_decay * w[i];
      w[i] = static_cast<float>(w[i] - cfg_.lr * upd);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

double AdamOptimizer::clip_grad_norm(double max_norm) {
  double sq = 0;
  for (auto& [name, t] : params_) {
    if (!t.has_grad()) continue;
    for (const float g : t.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& [name, t] : params_) {
      if (!t.has_grad()) continue;
      for (float& g : t.grad_mutable()) g *= scale;
    }
  }
  return norm;
}

}  // namespace rerender
