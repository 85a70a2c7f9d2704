// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "rerender/losses.hpp"

using namespace rerender;

namespace {

Tensor random_image(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(s);
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

}  // namespace

TEST_CASE("loss weight defaults match the published values") {
  const LossWeights w;
  CHECK(w.lambda_r_vgg == 0.9);
  CHECK(w.lambda_r_img == 0.1);
  CHECK(w.lambda_w_img == 1.0);
  CHECK(w.lambda_w_reg == 1.0);
  CHECK(w.lambda_c == 0.5);
  CHECK(w.lambda_d == 1.0);
}

TEST_CASE("coarse loss: zero on perfect prediction, arithmetic, oracle") {
  Tensor img = random_image({1, 3, 8, 8}, 1);
  Tensor mask = random_image({1, 1, 8, 8}, 2);
  Tensor zero = coarse_loss(img, mask, img, mask);
  CHECK(zero.vec()[0] == 0.f);

  Tensor off = add_scalar(img, 0.1f);
  Tensor l = coarse_loss(off, mask, img, mask);
  CHECK(l.vec()[0] == doctest::Approx(0.1f).epsilon(1e-5));

  // Brute-force elementwise computation.
  Tensor pred_m = random_image({1, 1, 8, 8}, 3);
  Tensor lc = coarse_loss(off, pred_m, img, mask);
  double ref = 0;
  for (int64_t i = 0; i < img.numel(); ++i)
    ref += std::abs(double(off.vec()[size_t(i)]) - img.vec()[size_t(i)]) / img.numel();
  for (int64_t i = 0; i < mask.numel(); ++i)
    ref += std::abs(double(pred_m.vec()[size_t(i)]) - mask.vec()[size_t(i)]) / mask.numel();
  CHECK(lc.vec()[0] == doctest::Approx(ref).epsilon(1e-7));

  CHECK_THROWS_AS((void)coarse_loss(img, mask, img, img), ContractError);
}

TEST_CASE("reconstruction loss: zero at target, offset value, monotone interpolation") {
  PerceptualExtractor extractor(4242);
  Tensor gt = random_image({1, 3, 32, 16}, 5);

  ReconstructionLoss<float> at_target = reconstruction_loss(gt, gt, extractor);
  CHECK(at_target.vgg.vec()[0] == 0.f);
  CHECK(at_target.img.vec()[0] == 0.f);

  Tensor off = Tensor::zeros(gt.shape());
  for (int64_t i = 0; i < gt.numel(); ++i)
    off.vec()[size_t(i)] = std::min(1.f, gt.vec()[size_t(i)] * 0.5f + 0.25f);
  ReconstructionLoss<float> shifted = reconstruction_loss(add_scalar(mul_scalar(gt, 0.f), 0.25f),
                                                          Tensor::zeros(gt.shape()), extractor);
  CHECK(shifted.img.vec()[0] == doctest::Approx(0.25f).epsilon(1e-5));

  // The perceptual term decreases monotonically along a straight path to gt.
  Tensor start = random_image({1, 3, 32, 16}, 6);
  double prev = 1e9;
  for (int step = 0; step <= 4; ++step) {
    const float t = static_cast<float>(step) / 4.f;
    Tensor x = add(mul_scalar(start, 1.f - t), mul_scalar(gt, t));
    ReconstructionLoss<float> rl = reconstruction_loss(x, gt, extractor);
    const double v = rl.vgg.vec()[0];
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("perceptual extractor is reproducible from its seed") {
  PerceptualExtractor a(123), b(123), c(124);
  Tensor probe = random_image({1, 3, 16, 16}, 7);
  auto fa = a.forward(probe), fb = b.forward(probe), fc = c.forward(probe);
  REQUIRE(fa.size() == 5);
  CHECK(fa[0].shape().c == 16);
  CHECK(fa[4].shape().c == 256);
  for (size_t i = 0; i < fa.size(); ++i) CHECK(fa[i].vec() == fb[i].vec());
  CHECK(fa[0].vec() != fc[0].vec());
}

TEST_CASE("warp schedule: published lambda values, exact") {
  using WS = WarpSchedule;
  CHECK(WS::kRampStart == 5);
  CHECK(WS::kCurriculumEnd == 15);

  auto l0 = WS::lambdas_for_epoch(0);
  CHECK(l0.coarse_img == 1.0);
  CHECK(l0.refined_img == 0.0);
  CHECK(l0.reg == 1.0);

  auto l5 = WS::lambdas_for_epoch(5);
  CHECK(l5.refined_img == 0.5);
  CHECK(l5.coarse_img == 0.5);
  CHECK(l5.reg == 1.0);

  auto l10 = WS::lambdas_for_epoch(10);
  CHECK(l10.refined_img == 0.75);
  CHECK(l10.coarse_img == 0.25);
  CHECK(l10.reg == 1.0);

  auto l15 = WS::lambdas_for_epoch(15);
  CHECK(l15.refined_img == 1.0);
  CHECK(l15.coarse_img == 0.0);
  CHECK(l15.reg == 0.0);

  auto l20 = WS::lambdas_for_epoch(20);
  CHECK(l20.refined_img == 1.0);
  CHECK(l20.reg == 0.0);
}

TEST_CASE("warp loss honors the curriculum") {
  Tensor ref = random_image({1, 3, 16, 8}, 8);
  Tensor gt = random_image({1, 3, 16, 8}, 9);
  Rng rng(10);
  Tensor wc = Tensor::zeros({1, 2, 4, 2});
  Tensor w = Tensor::zeros({1, 2, 4, 2});
  for (auto& v : wc.vec()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  for (auto& v : w.vec()) v = static_cast<float>(rng.uniform(-0.1, 0.1));

  WarpLoss<float> early = warp_loss(ref, gt, wc, w, 0);
  CHECK(early.lambdas.coarse_img == 1.0);
  CHECK(early.lambdas.refined_img == 0.0);
  // Early total = coarse warp l1 + reg (refined term weighted by zero).
  CHECK(early.total.vec()[0] ==
        doctest::Approx(early.coarse_img + early.reg).epsilon(1e-6));

  WarpLoss<float> late = warp_loss(ref, gt, wc, w, 20);
  CHECK(late.total.vec()[0] == doctest::Approx(late.refined_img).epsilon(1e-6));
  CHECK(late.reg == 0.0);

  // Identical fields mean zero residual: reg is 0 iff refine is inactive.
  WarpLoss<float> same = warp_loss(ref, gt, wc, wc, 7);
  CHECK(same.reg == 0.0);
}

TEST_CASE("total detail loss and finetune loss weighted sums") {
  CHECK(total_detail_loss(1, 1, 1, 1, true) == doctest::Approx(3.0));
  CHECK(total_detail_loss(1, 1, 1, 1, false) == doctest::Approx(2.0));
  CHECK(total_detail_loss(0, 0, 0, 0, true) == 0.0);

  CHECK(finetune_loss(2.0, 1.0) == doctest::Approx(2.0));
  CHECK(finetune_loss(0.0, 0.0) == 0.0);
}

TEST_CASE("losses propagate finite gradients") {
  PerceptualExtractor extractor(99);
  Tensor pred = random_image({1, 3, 16, 16}, 11);
  pred.set_requires_grad(true);
  Tensor gt = random_image({1, 3, 16, 16}, 12);
  ReconstructionLoss<float> rl = reconstruction_loss(pred, gt, extractor);
  backward(add(rl.vgg, rl.img));
  REQUIRE(pred.has_grad());
  for (const float g : pred.grad()) CHECK(std::isfinite(g));
}
