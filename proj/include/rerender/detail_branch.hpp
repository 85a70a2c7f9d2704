// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rerender/nn.hpp"
#include "rerender/pyramid.hpp"

namespace rerender {

// Reference encoder: 7x7 stem + three down blocks, run at working resolution.
// Pyramids are cacheable per reference image once the encoder is frozen.
class RefEncoder {
 public:
  RefEncoder() = default;
  explicit RefEncoder(Rng& rng);

  FeaturePyramid forward(const Tensor& reference_image) const;

  void collect(const std::string& prefix, ParamRefs& out) const;

 private:
  ConvBlock stem_;  // 7x7, 3 -> 32
  DownBlock down1_, down2_, down3_;
};

// Spatially adaptive normalization: instance-normalizes x, then scales and
// shifts it with per-pixel parameters predicted from the conditioning map.
struct SpadeNorm {
  Conv2dLayer shared;  // cond -> hidden
  Conv2dLayer gamma;   // hidden -> x channels
  Conv2dLayer beta;

  SpadeNorm() = default;
  SpadeNorm(int x_ch, int cond_ch, int hidden, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& cond) const;
  void collect(const std::string& prefix, ParamRefs& out) const;
};

// Detail decoder: the deepest blended level feeds the trunk, the three
// shallower levels condition the SPADE layers. Output is an unbounded
// 3-channel residual at working resolution.
class DetailDecoder {
 public:
  DetailDecoder() = default;
  explicit DetailDecoder(Rng& rng);

  Tensor forward(const FeaturePyramid& blended) const;

  void collect(const std::string& prefix, ParamRefs& out) const;

  static constexpr int kSpadeHidden = 32;

 private:
  UpBlock up1_, up2_, up3_;        // 128, 64, 32
  SpadeNorm sp1_, sp2_, sp3_;
  Conv2dLayer head_;               // 3 channels, no activation
};

// Residual composition of the two branches, clamped to image range.
Tensor compose_output(const Tensor& coarse_image, const Tensor& detail_image);

}  // namespace rerender
