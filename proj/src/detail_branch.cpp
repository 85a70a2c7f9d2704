// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/detail_branch.hpp"

namespace rerender {

RefEncoder::RefEncoder(Rng& rng)
    : stem_(3, 32, 7, rng),
      down1_(32, 64, rng),
      down2_(64, 128, rng),
      down3_(128, 256, rng) {}

FeaturePyramid RefEncoder::forward(const Tensor& reference_image) const {
  const Shape s = reference_image.shape();
  RR_CHECK(s.c == 3, "reference encoder expects a 3-channel image, got " << s.str());
  FeaturePyramid out;
  out[0] = stem_.forward(reference_image);
  out[1] = down1_.forward(out[0]);
  out[2] = down2_.forward(out[1]);
  out[3] = down3_.forward(out[2]);
  out.validate();
  return out;
}

void RefEncoder::collect(const std::string& prefix, ParamRefs& out) const {
  stem_.collect(prefix + ".stem", out);
  down1_.collect(prefix + ".down1", out);
  down2_.collect(prefix + ".down2", out);
  down3_.collect(prefix + ".down3", out);
}

SpadeNorm::SpadeNorm(int x_ch, int cond_ch, int hidden, Rng& rng)
    : shared(cond_ch, hidden, 3, 1, 1, rng),
      gamma(hidden, x_ch, 3, 1, 1, rng),
      beta(hidden, x_ch, 3, 1, 1, rng) {}

Tensor SpadeNorm::forward(const Tensor& x, const Tensor& cond) const {
  RR_CHECK(x.shape().h == cond.shape().h && x.shape().w == cond.shape().w,
           "SPADE conditioning map " << cond.shape().str() << " does not match "
                                     << x.shape().str());
  Tensor h = relu(shared.forward(cond));
  Tensor scale = add_scalar(gamma.forward(h), 1.f);
  return add(mul(instance_norm(x), scale), beta.forward(h));
}

void SpadeNorm::collect(const std::string& prefix, ParamRefs& out) const {
  shared.collect(prefix + ".shared", out);
  gamma.collect(prefix + ".gamma", out);
  beta.collect(prefix + ".beta", out);
}

DetailDecoder::DetailDecoder(Rng& rng)
    : up1_(256, 128, rng),
      up2_(128, 64, rng),
      up3_(64, 32, rng),
      sp1_(128, 128, kSpadeHidden, rng),
      sp2_(64, 64, kSpadeHidden, rng),
      sp3_(32, 32, kSpadeHidden, rng),
      head_(32, 3, 3, 1, 1, rng) {}

Tensor DetailDecoder::forward(const FeaturePyramid& blended) const {
  for (int i = 0; i < 4; ++i)
    RR_CHECK(blended[i].defined(), "detail decoder missing pyramid level " << i);
  Tensor x = up1_.forward(blended[3]);
  x = relu(sp1_.forward(x, blended[2]));
  x = up2_.forward(x);
  x = relu(sp2_.forward(x, blended[1]));
  x = up3_.forward(x);
  x = relu(sp3_.forward(x, blended[0]));
  return head_.forward(x);
}

void DetailDecoder::collect(const std::string& prefix, ParamRefs& out) const {
  up1_.collect(prefix + ".up1", out);
  up2_.collect(prefix + ".up2", out);
  up3_.collect(prefix + ".up3", out);
  sp1_.collect(prefix + ".sp1", out);
  sp2_.collect(prefix + ".sp2", out);
  sp3_.collect(prefix + ".sp3", out);
  head_.collect(prefix + ".head", out);
}

Tensor compose_output(const Tensor& coarse_image, const Tensor& detail_image) {
  RR_CHECK(coarse_image.shape() == detail_image.shape(),
           "compose_output shape mismatch: " << coarse_image.shape().str() << " vs "
                                             << detail_image.shape().str());
  return clamp01(add(coarse_image, detail_image));
}

}  // namespace rerender
