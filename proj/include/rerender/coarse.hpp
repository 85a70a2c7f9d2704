// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rerender/nn.hpp"
#include "rerender/pyramid.hpp"

namespace rerender {

struct CoarseOutput {
  Tensor image;  // 3 channels, sigmoid range, working resolution
  Tensor mask;   // 1 channel, sigmoid range
  FeaturePyramid guidance;
};

// U-Net style repair branch. The input is downsampled x2 before encoding and
// the 4-channel sigmoid output (RGB + mask) is upsampled back to working
// resolution. Encoder activations form the guidance pyramid.
class CoarseBranch {
 public:
  CoarseBranch() = default;
  explicit CoarseBranch(Rng& rng);

  CoarseOutput forward(const Tensor& rendered_input) const;

  void collect(const std::string& prefix, ParamRefs& out) const;

 private:
  ConvBlock stem_;                    // 3 -> 32
  DownBlock down1_, down2_, down3_;   // 64, 128, 256
  UpBlock up1_, up2_, up3_;           // 128, 64, 32
  ConvBlock dec1_, dec2_, dec3_;      // after skip concat
  Conv2dLayer head_;                  // 4 channels + sigmoid
};

// Threshold helper for display/compositing; strictly greater-than.
Tensor binarize_mask(const Tensor& mask, float threshold = 0.5f);

}  // namespace rerender
