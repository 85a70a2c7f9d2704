// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/losses.hpp"

#include <cmath>

namespace rerender {

WarpSchedule::Lambdas WarpSchedule::lambdas_for_epoch(int epoch) {
  if (epoch < kRampStart) return {1.0, 0.0, 1.0};
  if (epoch < kCurriculumEnd) {
    const double refined = 0.5 + 0.05 * (epoch - kRampStart);
    return {1.0 - refined, refined, 1.0};
  }
  return {0.0, 1.0, 0.0};
}

template <typename T>
PerceptualExtractorT<T>::PerceptualExtractorT(uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  int in_ch = 3;
  for (const int out_ch : kChannels) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(in_ch) * 9));
    TensorT<T> w = TensorT<T>::zeros({out_ch, in_ch, 3, 3});
    for (auto& v : w.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
    weights_.push_back(w);
    biases_.push_back(TensorT<T>::zeros({1, out_ch, 1, 1}));
    in_ch = out_ch;
  }
}

template <typename T>
std::vector<TensorT<T>> PerceptualExtractorT<T>::forward(const TensorT<T>& image) const {
  RR_CHECK(!weights_.empty(), "perceptual extractor not initialized");
  RR_CHECK(image.shape().c == 3, "perceptual extractor expects 3 channels");
  std::vector<TensorT<T>> feats;
  TensorT<T> x = image;
  for (size_t i = 0; i < weights_.size(); ++i) {
    x = relu(conv2d(x, weights_[i], biases_[i], /*stride=*/2, /*padding=*/1));
    feats.push_back(x);
  }
  return feats;
}

template <typename T>
TensorT<T> coarse_loss(const TensorT<T>& coarse_image, const TensorT<T>& coarse_mask,
                       const TensorT<T>& gt_image, const TensorT<T>& gt_mask) {
  return add(l1_loss(coarse_image, gt_image), l1_loss(coarse_mask, gt_mask));
}

template <typename T>
ReconstructionLoss<T> reconstruction_loss(const TensorT<T>& output, const TensorT<T>& gt,
                                          const PerceptualExtractorT<T>& extractor) {
  RR_CHECK(output.shape() == gt.shape(), "reconstruction_loss shape mismatch");
  ReconstructionLoss<T> out;
  out.img = l1_loss(output, gt);
  TensorT<T> acc;
  const Shape s = output.shape();
  for (int scale = 0; scale < 3; ++scale) {
    const int h = std::max(1, s.h >> scale);
    const int w = std::max(1, s.w >> scale);
    TensorT<T> a = scale == 0 ? output : bilinear_resize(output, h, w);
    TensorT<T> b = scale == 0 ? gt : bilinear_resize(gt, h, w);
    auto fa = extractor.forward(a);
    auto fb = extractor.forward(b);
    for (size_t i = 0; i < fa.size(); ++i) {
      TensorT<T> term = l1_loss(fa[i], fb[i]);
      acc = acc.defined() ? add(acc, term) : term;
    }
  }
  out.vgg = acc;
  return out;
}

template <typename T>
WarpLoss<T> warp_loss(const TensorT<T>& reference, const TensorT<T>& gt,
                      const TensorT<T>& coarse_field, const TensorT<T>& total_field,
                      int epoch) {
  RR_CHECK(reference.shape() == gt.shape(), "warp_loss image shape mismatch");
  RR_CHECK(coarse_field.shape() == total_field.shape(), "warp_loss field shape mismatch");
  const Shape s = gt.shape();

  WarpLoss<T> out;
  out.lambdas = WarpSchedule::lambdas_for_epoch(epoch);

  TensorT<T> warped = grid_sample(reference, bilinear_resize(total_field, s.h, s.w));
  TensorT<T> refined_l1 = l1_loss(warped, gt);
  out.refined_img = static_cast<double>(refined_l1.vec()[0]);

  if (epoch >= WarpSchedule::kCurriculumEnd) {
    out.total = refined_l1;
    return out;
  }

  TensorT<T> coarse_warped = grid_sample(reference, bilinear_resize(coarse_field, s.h, s.w));
  TensorT<T> coarse_l1 = l1_loss(coarse_warped, gt);
  out.coarse_img = static_cast<double>(coarse_l1.vec()[0]);

  TensorT<T> residual = sub(total_field, coarse_field);
  TensorT<T> reg = l1_loss(residual, TensorT<T>::zeros(residual.shape()));
  out.reg = static_cast<double>(reg.vec()[0]);

  out.total = add(add(mul_scalar(coarse_l1, static_cast<T>(out.lambdas.coarse_img)),
                      mul_scalar(refined_l1, static_cast<T>(out.lambdas.refined_img))),
                  mul_scalar(reg, static_cast<T>(out.lambdas.reg)));
  return out;
}

double total_detail_loss(double r_vgg, double r_img, double w_img, double w_reg,
                         bool early_phase, const LossWeights& w) {
  double total = w.lambda_r_vgg * r_vgg + w.lambda_r_img * r_img + w.lambda_w_img * w_img;
  if (early_phase) total += w.lambda_w_reg * w_reg;
  return total;
}

double finetune_loss(double coarse, double detail, const LossWeights& w) {
  return w.lambda_c * coarse + w.lambda_d * detail;
}

template class PerceptualExtractorT<float>;
template class PerceptualExtractorT<double>;
#define RR_INSTANTIATE(T)                                                              \
  template TensorT<T> coarse_loss<T>(const TensorT<T>&, const TensorT<T>&,             \
                                     const TensorT<T>&, const TensorT<T>&);            \
  template ReconstructionLoss<T> reconstruction_loss<T>(const TensorT<T>&,             \
                                                        const TensorT<T>&,             \
                                                        const PerceptualExtractorT<T>&); \
  template WarpLoss<T> warp_loss<T>(const TensorT<T>&, const TensorT<T>&,              \
                                    const TensorT<T>&, const TensorT<T>&, int);
RR_INSTANTIATE(float)
RR_INSTANTIATE(double)
#undef RR_INSTANTIATE

}  // namespace rerender
