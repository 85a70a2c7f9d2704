// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "rerender/coarse.hpp"
#include "rerender/detail_branch.hpp"
#include "rerender/model.hpp"
#include "rerender/warp.hpp"

using namespace rerender;

namespace {

Tensor random_image(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(s);
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

}  // namespace

TEST_CASE("coarse branch: builds deterministically and matches the layer plan") {
  Rng rng_a(42), rng_b(42);
  CoarseBranch a(rng_a), b(rng_b);
  ParamRefs pa, pb;
  a.collect("coarse", pa);
  b.collect("coarse", pb);
  REQUIRE(pa.size() == pb.size());
  int64_t count_a = 0;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.vec() == pb[i].second.vec());
    count_a += pa[i].second.numel();
  }
  CHECK(count_a > 0);

  // Encoder channel sequence and the 4-channel head.
  bool saw_head = false;
  for (const auto& [name, t] : pa) {
    if (name == "coarse.stem.weight") CHECK(t.shape().n == 32);
    if (name == "coarse.down1.weight") CHECK(t.shape().n == 64);
    if (name == "coarse.down2.weight") CHECK(t.shape().n == 128);
    if (name == "coarse.down3.weight") CHECK(t.shape().n == 256);
    if (name == "coarse.head.weight") {
      CHECK(t.shape().n == 4);
      saw_head = true;
    }
  }
  CHECK(saw_head);
}

TEST_CASE("coarse forward: ranges, guidance pyramid, determinism") {
  Rng rng(1);
  CoarseBranch branch(rng);
  Tensor input = random_image({1, 3, 128, 64}, 9);

  CoarseOutput out = branch.forward(input);
  CHECK(out.image.shape() == Shape{1, 3, 128, 64});
  CHECK(out.mask.shape() == Shape{1, 1, 128, 64});
  for (const float v : out.image.vec()) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
  for (const float v : out.mask.vec()) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }

  // Guidance spatial chain for a 128x64 input: 64x32 ... 8x4.
  CHECK(out.guidance[0].shape() == Shape{1, 32, 64, 32});
  CHECK(out.guidance[1].shape() == Shape{1, 64, 32, 16});
  CHECK(out.guidance[2].shape() == Shape{1, 128, 16, 8});
  CHECK(out.guidance[3].shape() == Shape{1, 256, 8, 4});

  CoarseOutput out2 = branch.forward(input);
  CHECK(out.image.vec() == out2.image.vec());
  CHECK(out.mask.vec() == out2.mask.vec());

  CHECK_THROWS_AS((void)branch.forward(Tensor::zeros({1, 1, 128, 64})), ContractError);
  Tensor bad = Tensor::full({1, 3, 128, 64}, 1.5f);
  CHECK_THROWS_AS((void)branch.forward(bad), ContractError);
}

TEST_CASE("binarize_mask") {
  Tensor m = Tensor::from_data({1, 1, 1, 4}, {0.49f, 0.51f, 0.f, 1.f});
  Tensor b = binarize_mask(m);
  CHECK(b.vec() == std::vector<float>{0.f, 1.f, 0.f, 1.f});
  Tensor zeros = Tensor::zeros({1, 1, 2, 2});
  Tensor bz = binarize_mask(zeros);
  for (const float v : bz.vec()) CHECK(v == 0.f);
}

TEST_CASE("reference encoder: channels and cacheability") {
  Rng rng(2);
  RefEncoder enc(rng);
  Tensor ref = random_image({1, 3, 128, 64}, 10);
  FeaturePyramid p1 = enc.forward(ref);
  FeaturePyramid p2 = enc.forward(ref);
  CHECK(p1[0].shape() == Shape{1, 32, 128, 64});
  CHECK(p1[1].shape() == Shape{1, 64, 64, 32});
  CHECK(p1[2].shape() == Shape{1, 128, 32, 16});
  CHECK(p1[3].shape() == Shape{1, 256, 16, 8});
  for (int i = 0; i < 4; ++i) CHECK(p1[i].vec() == p2[i].vec());
}

TEST_CASE("heatmaps: peaks, invisibility, brute-force sum") {
  KeypointSet kps;
  // One keypoint exactly at a pixel center of a 32x16 map.
  const int h = 32, w = 16;
  kps.pts[0] = {pixel_to_norm(10.f, w), pixel_to_norm(20.f, h), true};
  Tensor hm = keypoints_to_heatmaps(kps, h, w, heatmap_sigma(h));
  CHECK(hm.shape() == Shape{1, 25, h, w});
  CHECK(hm.at(0, 0, 20, 10) == doctest::Approx(1.f));
  for (int k = 1; k < kNumKeypoints; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) CHECK(hm.at(0, k, y, x) == 0.f);

  // Brute-force Gaussian evaluation agrees.
  const float sigma = heatmap_sigma(h);
  double sum_impl = 0, sum_ref = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      sum_impl += hm.at(0, 0, y, x);
      const double dx = x - 10.0, dy = y - 20.0;
      sum_ref += std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  CHECK(sum_impl == doctest::Approx(sum_ref).epsilon(1e-6));

  KeypointSet none;
  Tensor zero_hm = keypoints_to_heatmaps(none, h, w, heatmap_sigma(h));
  for (const float v : zero_hm.vec()) CHECK(v == 0.f);
}

TEST_CASE("coarse_field: zero displacement, symmetry, weighted-sum oracle") {
  const int h = 32, w = 16;
  KeypointSet pose;
  Rng rng(5);
  for (int k = 0; k < kNumKeypoints; ++k)
    pose.pts[size_t(k)] = {static_cast<float>(rng.uniform(-0.8, 0.8)),
                           static_cast<float>(rng.uniform(-0.8, 0.8)), true};
  Tensor hm = keypoints_to_heatmaps(pose, h, w, heatmap_sigma(h));

  // Identical poses -> identically zero field.
  Tensor zero_field = coarse_field(pose, pose, hm);
  for (const float v : zero_field.vec()) CHECK(v == 0.f);

  // All invisible -> zero field (background only).
  KeypointSet hidden;
  Tensor hidden_field = coarse_field(hidden, pose, hm);
  for (const float v : hidden_field.vec()) CHECK(v == 0.f);

  // Swapping the roles negates the field when weights are shared.
  KeypointSet shifted = pose;
  for (auto& p : shifted.pts) {
    p.x += 0.07f;
    p.y -= 0.04f;
  }
  Tensor fwd = coarse_field(pose, shifted, hm);
  Tensor bwd = coarse_field(shifted, pose, hm);
  for (int64_t i = 0; i < fwd.numel(); ++i)
    CHECK(fwd.vec()[size_t(i)] == doctest::Approx(-bwd.vec()[size_t(i)]).epsilon(1e-6));

  // Single visible keypoint under uniform translation: the closed form.
  KeypointSet one;
  one.pts[3] = {0.1f, -0.2f, true};
  KeypointSet one_moved = one;
  one_moved.pts[3].x += 0.2f;
  one_moved.pts[3].y += 0.1f;
  Tensor hm_one = keypoints_to_heatmaps(one_moved, h, w, heatmap_sigma(h));
  Tensor field = coarse_field(one, one_moved, hm_one, 0.1f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float wk = hm_one.at(0, 3, y, x);
      const float expect_x = wk * 0.2f / (wk + 0.1f);
      const float expect_y = wk * 0.1f / (wk + 0.1f);
      CHECK(field.at(0, 0, y, x) == doctest::Approx(expect_x).epsilon(1e-5));
      CHECK(field.at(0, 1, y, x) == doctest::Approx(expect_y).epsilon(1e-5));
    }
  // Near the keypoint the displacement approaches the translation; far away
  // the background weight pulls it toward zero.
  const int kx = static_cast<int>(std::lround(norm_to_pixel(one_moved.pts[3].x, w)));
  const int ky = static_cast<int>(std::lround(norm_to_pixel(one_moved.pts[3].y, h)));
  CHECK(field.at(0, 0, ky, kx) > 0.15f);
  CHECK(std::abs(field.at(0, 0, 0, w - 1)) < 0.05f);
}

TEST_CASE("refine net is exactly zero at initialization") {
  Rng rng(8);
  RefineNet net(rng);
  Tensor ref_q = random_image({1, 3, 32, 16}, 11);
  Tensor warped_q = random_image({1, 3, 32, 16}, 12);
  KeypointSet kps;
  kps.pts[0] = {0.f, 0.f, true};
  Tensor hm = keypoints_to_heatmaps(kps, 32, 16, heatmap_sigma(32));
  Tensor out = net.forward(ref_q, warped_q, hm, hm);
  CHECK(out.shape() == Shape{1, 2, 32, 16});
  for (const float v : out.vec()) CHECK(v == 0.f);
}

TEST_CASE("warp_pyramid: identity on zero field, shift oracle, invariants") {
  Rng rng(3);
  RefEncoder enc(rng);
  Tensor ref = random_image({1, 3, 128, 64}, 13);
  FeaturePyramid pyr = enc.forward(ref);

  Tensor zero_field = Tensor::zeros({1, 2, 32, 16});
  FeaturePyramid same = warp_pyramid(pyr, zero_field);
  same.validate();
  for (int i = 0; i < 4; ++i) CHECK(same[i].vec() == pyr[i].vec());

  // Constant one-pixel shift at level 0 matches the direct shift.
  const float one_px = 2.f / 64;
  Tensor shift = Tensor::full({1, 2, 32, 16}, 0.f);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 16; ++x) shift.at(0, 0, y, x) = one_px;
  FeaturePyramid shifted = warp_pyramid(pyr, shift);
  const Shape s0 = pyr[0].shape();
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < s0.h; ++y)
      for (int x = 0; x < s0.w; ++x) {
        const int src = std::min(x + 1, s0.w - 1);
        CHECK(shifted[0].at(0, c, y, x) ==
              doctest::Approx(pyr[0].at(0, c, y, src)).epsilon(2e-4));
      }
}

TEST_CASE("blend_features: endpoints bitwise, default, linearity") {
  Rng rng(4);
  RefEncoder enc(rng);
  CoarseBranch coarse(rng);
  Tensor ref = random_image({1, 3, 128, 64}, 14);
  Tensor input = random_image({1, 3, 128, 64}, 15);
  FeaturePyramid fw = enc.forward(ref);
  FeaturePyramid fg = coarse.forward(input).guidance;

  CHECK(kDefaultBlendAlpha == 0.1f);

  FeaturePyramid b0 = blend_features(fg, fw, 0.f);
  for (int i = 0; i < 4; ++i) CHECK(b0[i].vec() == fw[i].vec());

  FeaturePyramid b1 = blend_features(fg, fw, 1.f);
  for (int i = 0; i < 4; ++i) {
    const Shape ws = fw[i].shape();
    Tensor resized = bilinear_resize(fg[i], ws.h, ws.w);
    CHECK(b1[i].vec() == resized.vec());
  }

  // Linearity in alpha: F(a1) + F(a2) == F(a1+a2) + F(0).
  FeaturePyramid fa = blend_features(fg, fw, 0.15f);
  FeaturePyramid fb = blend_features(fg, fw, 0.25f);
  FeaturePyramid fc = blend_features(fg, fw, 0.40f);
  for (int i = 0; i < 4; ++i)
    for (int64_t j = 0; j < fa[i].numel(); ++j) {
      const double lhs = double(fa[i].vec()[size_t(j)]) + fb[i].vec()[size_t(j)];
      const double rhs = double(fc[i].vec()[size_t(j)]) + b0[i].vec()[size_t(j)];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }

  CHECK_THROWS_AS((void)blend_features(fg, fw, 1.5f), ContractError);
}

TEST_CASE("detail decoder: shapes and the zeroed-conditioning ablation") {
  Rng rng(6);
  DetailDecoder dec(rng);
  RefEncoder enc(rng);
  Tensor ref_a = random_image({1, 3, 128, 64}, 16);
  Tensor ref_b = random_image({1, 3, 128, 64}, 17);
  FeaturePyramid pa = enc.forward(ref_a);
  FeaturePyramid pb = enc.forward(ref_b);

  Tensor out = dec.forward(pa);
  CHECK(out.shape() == Shape{1, 3, 128, 64});

  // With zeroed conditioning levels, the output depends only on the trunk.
  FeaturePyramid za = pa, zb = pb;
  zb[3] = pa[3];  // same trunk, different (to-be-zeroed) conditioning
  for (int i = 0; i < 3; ++i) {
    za[i] = Tensor::zeros(pa[i].shape());
    zb[i] = Tensor::zeros(pb[i].shape());
  }
  Tensor oa = dec.forward(za);
  Tensor ob = dec.forward(zb);
  CHECK(oa.vec() == ob.vec());
}

TEST_CASE("compose_output examples") {
  Tensor ic = Tensor::full({1, 3, 2, 2}, 0.5f);
  Tensor zero = Tensor::zeros({1, 3, 2, 2});
  CHECK(compose_output(ic, zero).vec() == ic.vec());

  Tensor hi = Tensor::full({1, 3, 1, 1}, 0.9f);
  Tensor add3 = Tensor::full({1, 3, 1, 1}, 0.3f);
  CHECK(compose_output(hi, add3).vec()[0] == doctest::Approx(1.f));

  Tensor neg = Tensor::full({1, 3, 1, 1}, -0.2f);
  Tensor mid = Tensor::full({1, 3, 1, 1}, 0.5f);
  CHECK(compose_output(mid, neg).vec()[0] == doctest::Approx(0.3f));

  CHECK_THROWS_AS((void)compose_output(ic, hi), ContractError);
}

TEST_CASE("end-to-end: with alpha 0 the detail image ignores the rendered input") {
  ModelConfig mc;
  mc.alpha = 0.f;
  RerenderModel model(mc);

  ImageFrame ref_frame;
  ref_frame.gt_image = tensor_to_image(random_image({1, 3, 128, 64}, 20));
  Rng rng(21);
  for (int k = 0; k < kNumKeypoints; ++k)
    ref_frame.keypoints.pts[size_t(k)] = {static_cast<float>(rng.uniform(-0.5, 0.5)),
                                          static_cast<float>(rng.uniform(-0.5, 0.5)), true};
  PreparedReference ref = prepare_reference(ref_frame, 128, 64);

  KeypointSet input_kps = ref_frame.keypoints;
  Tensor input_a = random_image({1, 3, 128, 64}, 22);
  Tensor input_b = random_image({1, 3, 128, 64}, 23);

  PipelineOutput oa = run_pipeline(model, input_a, input_kps, ref);
  PipelineOutput ob = run_pipeline(model, input_b, input_kps, ref);

  // Same pose and reference: detail path identical, coarse path differs.
  CHECK(oa.detail_image.vec() == ob.detail_image.vec());
  CHECK(oa.coarse_image.vec() != ob.coarse_image.vec());
}
