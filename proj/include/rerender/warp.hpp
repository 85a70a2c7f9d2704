// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rerender/keypoints.hpp"
#include "rerender/nn.hpp"
#include "rerender/pyramid.hpp"

namespace rerender {

// Displacement fields live at quarter working resolution in normalized
// coordinates, so they can be resized to any pyramid level without value
// rescaling. coarse is the keypoint-driven part, refine the learned residual.
struct WarpField {
  Tensor coarse;
  Tensor refine;
  Tensor total;  // coarse + refine
};

// Part-based rigid field: per-keypoint displacements (reference minus input,
// so the output grid reads from the reference) blended by the reference
// heatmap channels plus a constant background weight with zero displacement.
// Keypoints invisible in either set contribute nothing.
Tensor coarse_field(const KeypointSet& input_kps, const KeypointSet& ref_kps,
                    const Tensor& ref_heatmap, float background_weight = 0.1f);

// Residual-field network. Inputs (all at quarter resolution) are concatenated
// channelwise: reference image (3), coarse-warped reference (3), input
// heatmap (25), reference heatmap (25). The final conv is zero-initialized so
// the residual is exactly zero before training.
class RefineNet {
 public:
  RefineNet() = default;
  explicit RefineNet(Rng& rng);

  Tensor forward(const Tensor& ref_quarter, const Tensor& coarse_warped_ref,
                 const Tensor& input_heatmap, const Tensor& ref_heatmap) const;

  void collect(const std::string& prefix, ParamRefs& out) const;

 private:
  ConvBlock enc1_, enc2_;   // each followed by pooling
  ConvBlock bottleneck_;    // keeps resolution
  UpBlock up1_, up2_;
  Conv2dLayer head_;        // 2 channels, zero-initialized
};

// Warps every pyramid level: the field is resized to the level's spatial size
// (values unchanged) and applied with grid_sample.
FeaturePyramid warp_pyramid(const FeaturePyramid& ref_features, const Tensor& field);

}  // namespace rerender
