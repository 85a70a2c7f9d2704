// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "rerender/tensor.hpp"

namespace rerender {

// Four-level feature stack shared by both encoders: channels 32/64/128/256
// from shallow to deep, each level half the spatial size of the previous.
struct FeaturePyramid {
  std::array<Tensor, 4> levels;

  static constexpr std::array<int, 4> kChannels{32, 64, 128, 256};

  Tensor& operator[](int i) { return levels[static_cast<size_t>(i)]; }
  const Tensor& operator[](int i) const { return levels[static_cast<size_t>(i)]; }

  // Throws unless the channel sequence and halving chain hold.
  void validate() const;
};

// Eq.-style blend: per level, guidance * alpha + warped * (1 - alpha), after
// resizing guidance levels to the warped levels' spatial sizes. alpha 0 or 1
// returns the respective endpoint pyramid unchanged (bitwise).
FeaturePyramid blend_features(const FeaturePyramid& guidance, const FeaturePyramid& warped,
                              float alpha);

}  // namespace rerender
