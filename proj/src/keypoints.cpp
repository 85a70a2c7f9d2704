// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/keypoints.hpp"

namespace rerender {

Tensor keypoints_to_heatmaps(const KeypointSet& kps, int h, int w, float sigma) {
  RR_CHECK(h >= 1 && w >= 1, "heatmap size must be positive");
  RR_CHECK(sigma > 0.f, "heatmap sigma must be positive");
  Tensor out = Tensor::zeros({1, kNumKeypoints, h, w});
  const double inv = 1.0 / (2.0 * static_cast<double>(sigma) * sigma);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& p = kps.pts[static_cast<size_t>(k)];
    if (!p.visible) continue;
    const double px = norm_to_pixel(p.x, w);
    const double py = norm_to_pixel(p.y, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - px;
        const double dy = y - py;
        out.at(0, k, y, x) = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  return out;
}

}  // namespace rerender
