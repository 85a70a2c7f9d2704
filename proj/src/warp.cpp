// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/warp.hpp"

#include "rerender/ops.hpp"

namespace rerender {

Tensor coarse_field(const KeypointSet& input_kps, const KeypointSet& ref_kps,
                    const Tensor& ref_heatmap, float background_weight) {
  const Shape hs = ref_heatmap.shape();
  RR_CHECK(hs.n == 1 && hs.c == kNumKeypoints,
           "reference heatmap must be (1,25,h,w), got " << hs.str());
  RR_CHECK(background_weight > 0.f, "background weight must be positive");

  // Displacement per keypoint: reference minus input, so sampling at the
  // input-pose pixel reads the matching reference location.
  std::array<float, kNumKeypoints> dx{}, dy{};
  std::array<bool, kNumKeypoints> active{};
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& pi = input_kps.pts[static_cast<size_t>(k)];
    const Keypoint& pr = ref_kps.pts[static_cast<size_t>(k)];
    active[static_cast<size_t>(k)] = pi.visible && pr.visible;
    if (active[static_cast<size_t>(k)]) {
      dx[static_cast<size_t>(k)] = pr.x - pi.x;
      dy[static_cast<size_t>(k)] = pr.y - pi.y;
    }
  }

  Tensor out = Tensor::zeros({1, 2, hs.h, hs.w});
  for (int y = 0; y < hs.h; ++y) {
    for (int x = 0; x < hs.w; ++x) {
      double wsum = background_weight;
      double fx = 0, fy = 0;
      for (int k = 0; k < kNumKeypoints; ++k) {
        if (!active[static_cast<size_t>(k)]) continue;
        const double wk = ref_heatmap.at(0, k, y, x);
        wsum += wk;
        fx += wk * dx[static_cast<size_t>(k)];
        fy += wk * dy[static_cast<size_t>(k)];
      }
      out.at(0, 0, y, x) = static_cast<float>(fx / wsum);
      out.at(0, 1, y, x) = static_cast<float>(fy / wsum);
    }
  }
  return out;
}

RefineNet::RefineNet(Rng& rng)
    : enc1_(3 + 3 + 2 * kNumKeypoints, 32, 3, rng),
      enc2_(32, 64, 3, rng),
      bottleneck_(64, 128, 3, rng),
      up1_(128, 64, rng),
      up2_(64, 32, rng),
      head_(32, 2, 3, 1, 1, rng) {
  head_.zero_init();
}

Tensor RefineNet::forward(const Tensor& ref_quarter, const Tensor& coarse_warped_ref,
                          const Tensor& input_heatmap, const Tensor& ref_heatmap) const {
  const Shape rs = ref_quarter.shape();
  RR_CHECK(coarse_warped_ref.shape() == rs,
           "refine net resolution mismatch: " << coarse_warped_ref.shape().str() << " vs "
                                              << rs.str());
  RR_CHECK(input_heatmap.shape().h == rs.h && input_heatmap.shape().w == rs.w &&
               ref_heatmap.shape().h == rs.h && ref_heatmap.shape().w == rs.w,
           "refine net heatmaps must be at quarter resolution");

  Tensor x = concat_channels(concat_channels(ref_quarter, coarse_warped_ref),
                             concat_channels(input_heatmap, ref_heatmap));
  Tensor e1 = avg_pool2(enc1_.forward(x));
  Tensor e2 = avg_pool2(enc2_.forward(e1));
  Tensor b = bottleneck_.forward(e2);
  Tensor u1 = relu(instance_norm(up1_.forward(b)));
  Tensor u2 = relu(instance_norm(up2_.forward(u1)));
  return head_.forward(u2);
}

void RefineNet::collect(const std::string& prefix, ParamRefs& out) const {
  enc1_.collect(prefix + ".enc1", out);
  enc2_.collect(prefix + ".enc2", out);
  bottleneck_.collect(prefix + ".bottleneck", out);
  up1_.collect(prefix + ".up1", out);
  up2_.collect(prefix + ".up2", out);
  head_.collect(prefix + ".head", out);
}

FeaturePyramid warp_pyramid(const FeaturePyramid& ref_features, const Tensor& field) {
  RR_CHECK(field.shape().c == 2, "warp field must have 2 channels");
  FeaturePyramid out;
  for (int i = 0; i < 4; ++i) {
    const Shape ls = ref_features[i].shape();
    Tensor level_field = bilinear_resize(field, ls.h, ls.w);
    out[i] = grid_sample(ref_features[i], level_field);
  }
  return out;
}

}  // namespace rerender
