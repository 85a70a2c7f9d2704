// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rerender/ops.hpp"
#include "rerender/rng.hpp"

namespace rerender {

// Detail-stage loss weights (vgg-style perceptual, image l1, warp image,
// warp regularizer) and the two fine-tune combination weights.
struct LossWeights {
  double lambda_r_vgg = 0.9;
  double lambda_r_img = 0.1;
  double lambda_w_img = 1.0;
  double lambda_w_reg = 1.0;  // early phase only
  double lambda_c = 0.5;
  double lambda_d = 1.0;
};

// Warp-loss curriculum. The refine field needs careful early training: for
// the first kCurriculumEnd epochs the warp-image loss is split between the
// coarse-field warp and the full warp, with the full-warp share ramping from
// epoch kRampStart on, and the residual regularizer active.
struct WarpSchedule {
  static constexpr int kRampStart = 5;
  static constexpr int kCurriculumEnd = 15;

  struct Lambdas {
    double coarse_img = 1.0;
    double refined_img = 0.0;
    double reg = 1.0;
  };

  // epoch < 5:          (1, 0, 1)
  // 5 <= epoch < 15:    refined = 0.5 + 0.05 * (epoch - 5), coarse = 1 - refined, reg = 1
  // epoch >= 15:        (0, 1, 0)
  static Lambdas lambdas_for_epoch(int epoch);
};

// Fixed-weight multi-scale feature extractor standing in for a pretrained
// perceptual network: five stride-2 conv stages (channels 16/32/64/128/256),
// weights drawn once from the seed and never trained. The seed travels with
// checkpoints so loss values are comparable across runs.
template <typename T>
class PerceptualExtractorT {
 public:
  PerceptualExtractorT() = default;
  explicit PerceptualExtractorT(uint64_t seed);

  // Post-ReLU activations of the five stages.
  std::vector<TensorT<T>> forward(const TensorT<T>& image) const;

  uint64_t seed() const { return seed_; }
  static constexpr std::array<int, 5> kChannels{16, 32, 64, 128, 256};

 private:
  uint64_t seed_ = 0;
  std::vector<TensorT<T>> weights_;
  std::vector<TensorT<T>> biases_;
};

using PerceptualExtractor = PerceptualExtractorT<float>;

// L_c: image l1 plus mask l1.
template <typename T>
TensorT<T> coarse_loss(const TensorT<T>& coarse_image, const TensorT<T>& coarse_mask,
                       const TensorT<T>& gt_image, const TensorT<T>& gt_mask);

template <typename T>
struct ReconstructionLoss {
  TensorT<T> vgg;  // multi-scale perceptual term
  TensorT<T> img;  // plain l1 term
};

// L_r over scales 1, 1/2, 1/4 of the input and all extractor stages.
template <typename T>
ReconstructionLoss<T> reconstruction_loss(const TensorT<T>& output, const TensorT<T>& gt,
                                          const PerceptualExtractorT<T>& extractor);

template <typename T>
struct WarpLoss {
  TensorT<T> total;
  // Scalar values for logging.
  double coarse_img = 0, refined_img = 0, reg = 0;
  WarpSchedule::Lambdas lambdas;
};

// L_w per the curriculum. Fields are quarter-resolution and get upsampled to
// the image size for warping; the regularizer penalizes the residual part
// (total - coarse).
template <typename T>
WarpLoss<T> warp_loss(const TensorT<T>& reference, const TensorT<T>& gt,
                      const TensorT<T>& coarse_field, const TensorT<T>& total_field,
                      int epoch);

// L_d = 0.9 vgg + 0.1 img + 1.0 warp_img + 1.0 warp_reg (reg early phase only).
double total_detail_loss(double r_vgg, double r_img, double w_img, double w_reg,
                         bool early_phase, const LossWeights& w = {});

// L_f = 0.5 L_c + 1.0 L_d.
double finetune_loss(double coarse, double detail, const LossWeights& w = {});

}  // namespace rerender
