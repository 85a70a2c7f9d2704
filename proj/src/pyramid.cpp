// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/pyramid.hpp"

#include "rerender/ops.hpp"

namespace rerender {

void FeaturePyramid::validate() const {
  for (size_t i = 0; i < levels.size(); ++i) {
    RR_CHECK(levels[i].defined(), "pyramid level " << i << " missing");
    RR_CHECK(levels[i].shape().c == kChannels[i],
             "pyramid level " << i << " has " << levels[i].shape().c << " channels, expected "
                              << kChannels[i]);
    if (i > 0) {
      const Shape prev = levels[i - 1].shape();
      const Shape cur = levels[i].shape();
      RR_CHECK(cur.h * 2 == prev.h && cur.w * 2 == prev.w,
               "pyramid level " << i << " does not halve: " << prev.str() << " -> "
                                << cur.str());
      RR_CHECK(cur.n == prev.n, "pyramid batch mismatch");
    }
  }
}

FeaturePyramid blend_features(const FeaturePyramid& guidance, const FeaturePyramid& warped,
                              float alpha) {
  RR_CHECK(alpha >= 0.f && alpha <= 1.f, "blend alpha must be in [0,1], got " << alpha);
  for (int i = 0; i < 4; ++i) {
    RR_CHECK(guidance[i].shape().c == warped[i].shape().c,
             "blend level " << i << " channel mismatch: " << guidance[i].shape().str()
                            << " vs " << warped[i].shape().str());
  }
  if (alpha == 0.f) return warped;

  FeaturePyramid out;
  for (int i = 0; i < 4; ++i) {
    const Shape ws = warped[i].shape();
    Tensor g = bilinear_resize(guidance[i], ws.h, ws.w);
    if (alpha == 1.f) {
      out[i] = g;
    } else {
      out[i] = add(mul_scalar(g, alpha), mul_scalar(warped[i], 1.f - alpha));
    }
  }
  return out;
}

}  // namespace rerender
