// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>

#include "rerender/coarse.hpp"
#include "rerender/detail_branch.hpp"
#include "rerender/losses.hpp"
#include "rerender/synth.hpp"
#include "rerender/warp.hpp"

namespace rerender {

// Published training constants.
inline constexpr double kDefaultLearningRate = 5e-5;
inline constexpr double kDefaultWeightDecay = 3e-6;
inline constexpr int kDefaultBatchSize = 4;
inline constexpr int kFinetuneEpochs = 20;
inline constexpr int kFinetuneFrames = 5;   // frames, each with all views
inline constexpr int kReferenceCountFull = 32;  // full-scale reference count
inline constexpr int kReferenceCountDesk = 8;   // desk-scale default
inline constexpr float kDefaultBlendAlpha = 0.1f;

struct ModelConfig {
  int height = 128;
  int width = 64;
  float alpha = kDefaultBlendAlpha;
  bool with_coarse = true;  // false builds the guidance-free ablation variant
  uint64_t init_seed = 1;
  uint64_t extractor_seed = 77;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// The full two-branch network plus the fixed perceptual extractor.
class RerenderModel {
 public:
  RerenderModel() = default;
  explicit RerenderModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  float alpha() const { return cfg_.alpha; }

  CoarseBranch& coarse() { return coarse_; }
  const CoarseBranch& coarse() const { return coarse_; }
  RefEncoder& ref_encoder() { return ref_encoder_; }
  const RefEncoder& ref_encoder() const { return ref_encoder_; }
  RefineNet& refine() { return refine_; }
  const RefineNet& refine() const { return refine_; }
  DetailDecoder& decoder() { return decoder_; }
  const DetailDecoder& decoder() const { return decoder_; }
  const PerceptualExtractor& extractor() const { return extractor_; }

  // All parameters with stable dotted names ("coarse.stem.conv.weight", ...).
  ParamRefs parameters() const;
  // Name-prefix subsets.
  ParamRefs parameters_with_prefix(const std::string& prefix) const;
  void set_requires_grad_all(bool v);
  void set_requires_grad_prefix(const std::string& prefix, bool v);

  bool has_coarse() const { return cfg_.with_coarse; }

 private:
  ModelConfig cfg_;
  CoarseBranch coarse_;
  RefEncoder ref_encoder_;
  RefineNet refine_;
  DetailDecoder decoder_;
  PerceptualExtractor extractor_;
};

// One full forward pass through both branches.
struct PipelineOutput {
  Tensor coarse_image;   // undefined in the guidance-free variant
  Tensor coarse_mask;
  Tensor detail_image;   // unbounded residual
  Tensor composed;       // final image in [0, 1]
  Tensor field_coarse, field_total;
  FeaturePyramid guidance;  // levels undefined in the guidance-free variant
};

// Reference data prepared once per reference image.
struct PreparedReference {
  Tensor image;  // (1,3,H,W)
  KeypointSet keypoints;
  Tensor heatmap;  // quarter resolution
  std::optional<FeaturePyramid> cached_pyramid;  // valid while E_r is frozen
};

PreparedReference prepare_reference(const ImageFrame& ref, int height, int width);

// Runs the pipeline. When use_cached_pyramid is set and the reference carries
// one, the reference encoder is skipped (inference-path amortization).
PipelineOutput run_pipeline(const RerenderModel& model, const Tensor& rendered_input,
                            const KeypointSet& input_kps, const PreparedReference& ref,
                            float alpha_override = -1.f, bool use_cached_pyramid = false);

}  // namespace rerender
