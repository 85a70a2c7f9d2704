// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/coarse.hpp"

namespace rerender {

CoarseBranch::CoarseBranch(Rng& rng)
    : stem_(3, 32, 3, rng),
      down1_(32, 64, rng),
      down2_(64, 128, rng),
      down3_(128, 256, rng),
      up1_(256, 128, rng),
      up2_(128, 64, rng),
      up3_(64, 32, rng),
      dec1_(256, 128, 3, rng),
      dec2_(128, 64, 3, rng),
      dec3_(64, 32, 3, rng),
      head_(32, 4, 3, 1, 1, rng) {}

CoarseOutput CoarseBranch::forward(const Tensor& rendered_input) const {
  const Shape s = rendered_input.shape();
  RR_CHECK(s.c == 3, "coarse branch expects a 3-channel image, got " << s.str());
  RR_CHECK(s.h % 16 == 0 && s.w % 16 == 0,
           "working resolution must be divisible by 16, got " << s.str());
  for (const float v : rendered_input.vec())
    RR_CHECK(v >= 0.f && v <= 1.f, "coarse branch input outside [0,1]: " << v);

  // Runs on the x2-downsampled input; results are upsampled back.
  Tensor x = bilinear_resize(rendered_input, s.h / 2, s.w / 2);
  Tensor a0 = stem_.forward(x);
  Tensor a1 = down1_.forward(a0);
  Tensor a2 = down2_.forward(a1);
  Tensor a3 = down3_.forward(a2);

  Tensor d = up1_.forward(a3);
  d = dec1_.forward(concat_channels(d, a2));
  d = up2_.forward(d);
  d = dec2_.forward(concat_channels(d, a1));
  d = up3_.forward(d);
  d = dec3_.forward(concat_channels(d, a0));
  Tensor out4 = sigmoid(head_.forward(d));
  out4 = bilinear_resize(out4, s.h, s.w);

  CoarseOutput out;
  out.image = narrow_channels(out4, 0, 3);
  out.mask = narrow_channels(out4, 3, 1);
  out.guidance.levels = {a0, a1, a2, a3};
  out.guidance.validate();
  return out;
}

void CoarseBranch::collect(const std::string& prefix, ParamRefs& out) const {
  stem_.collect(prefix + ".stem", out);
  down1_.collect(prefix + ".down1", out);
  down2_.collect(prefix + ".down2", out);
  down3_.collect(prefix + ".down3", out);
  up1_.collect(prefix + ".up1", out);
  up2_.collect(prefix + ".up2", out);
  up3_.collect(prefix + ".up3", out);
  dec1_.collect(prefix + ".dec1", out);
  dec2_.collect(prefix + ".dec2", out);
  dec3_.collect(prefix + ".dec3", out);
  head_.collect(prefix + ".head", out);
}

Tensor binarize_mask(const Tensor& mask, float threshold) {
  for (const float v : mask.vec())
    RR_CHECK(v >= 0.f && v <= 1.f, "binarize_mask input outside [0,1]: " << v);
  Tensor out = Tensor::zeros(mask.shape());
  for (int64_t i = 0; i < mask.numel(); ++i)
    out.vec()[static_cast<size_t>(i)] = mask.vec()[static_cast<size_t>(i)] > threshold ? 1.f : 0.f;
  return out;
}

}  // namespace rerender
