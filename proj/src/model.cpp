// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/model.hpp"

#include "json.hpp"

namespace rerender {

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["height"] = height;
  j["width"] = width;
  j["alpha"] = alpha;
  j["with_coarse"] = with_coarse;
  j["init_seed"] = init_seed;
  j["extractor_seed"] = extractor_seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.alpha = j.at("alpha").get<float>();
  c.with_coarse = j.at("with_coarse").get<bool>();
  c.init_seed = j.at("init_seed").get<uint64_t>();
  c.extractor_seed = j.at("extractor_seed").get<uint64_t>();
  return c;
}

RerenderModel::RerenderModel(const ModelConfig& cfg) : cfg_(cfg) {
  RR_CHECK(cfg.height % 16 == 0 && cfg.width % 16 == 0,
           "working resolution must be divisible by 16");
  Rng rng(cfg.init_seed);
  if (cfg.with_coarse) coarse_ = CoarseBranch(rng);
  ref_encoder_ = RefEncoder(rng);
  refine_ = RefineNet(rng);
  decoder_ = DetailDecoder(rng);
  extractor_ = PerceptualExtractor(cfg.extractor_seed);
}

ParamRefs RerenderModel::parameters() const {
  ParamRefs out;
  if (cfg_.with_coarse) coarse_.collect("coarse", out);
  ref_encoder_.collect("ref_enc", out);
  refine_.collect("refine", out);
  decoder_.collect("decoder", out);
  return out;
}

ParamRefs RerenderModel::parameters_with_prefix(const std::string& prefix) const {
  ParamRefs out;
  for (auto& [name, t] : parameters())
    if (name.rfind(prefix, 0) == 0) out.emplace_back(name, t);
  return out;
}

void RerenderModel::set_requires_grad_all(bool v) {
  for (auto& [name, t] : parameters()) t.set_requires_grad(v);
}

void RerenderModel::set_requires_grad_prefix(const std::string& prefix, bool v) {
  for (auto& [name, t] : parameters())
    if (name.rfind(prefix, 0) == 0) t.set_requires_grad(v);
}

PreparedReference prepare_reference(const ImageFrame& ref, int height, int width) {
  RR_CHECK(ref.gt_image.height == height && ref.gt_image.width == width,
           "reference resolution does not match the model");
  PreparedReference out;
  out.image = image_to_tensor(ref.gt_image);
  out.keypoints = ref.keypoints;
  out.heatmap = keypoints_to_heatmaps(ref.keypoints, height / 4, width / 4,
                                      heatmap_sigma(height / 4));
  return out;
}

PipelineOutput run_pipeline(const RerenderModel& model, const Tensor& rendered_input,
                            const KeypointSet& input_kps, const PreparedReference& ref,
                            float alpha_override, bool use_cached_pyramid) {
  const Shape s = rendered_input.shape();
  RR_CHECK(s.n == 1 && s.c == 3, "pipeline expects a single 3-channel sample");
  const int qh = s.h / 4, qw = s.w / 4;

  PipelineOutput out;

  // Keypoint-driven fields at quarter resolution.
  Tensor input_heatmap =
      keypoints_to_heatmaps(input_kps, qh, qw, heatmap_sigma(qh));
  out.field_coarse = coarse_field(input_kps, ref.keypoints, ref.heatmap);

  Tensor ref_quarter = bilinear_resize(ref.image, qh, qw);
  Tensor coarse_warped = grid_sample(ref_quarter, out.field_coarse);
  Tensor residual =
      model.refine().forward(ref_quarter, coarse_warped, input_heatmap, ref.heatmap);
  out.field_total = add(out.field_coarse, residual);

  FeaturePyramid ref_pyramid;
  if (use_cached_pyramid && ref.cached_pyramid.has_value()) {
    ref_pyramid = *ref.cached_pyramid;
  } else {
    ref_pyramid = model.ref_encoder().forward(ref.image);
  }
  FeaturePyramid warped = warp_pyramid(ref_pyramid, out.field_total);

  FeaturePyramid blended;
  if (model.has_coarse()) {
    CoarseOutput coarse = model.coarse().forward(rendered_input);
    out.coarse_image = coarse.image;
    out.coarse_mask = coarse.mask;
    out.guidance = coarse.guidance;
    const float a = alpha_override >= 0.f ? alpha_override : model.alpha();
    blended = blend_features(coarse.guidance, warped, a);
  } else {
    blended = warped;
  }

  out.detail_image = model.decoder().forward(blended);
  if (model.has_coarse()) {
    out.composed = compose_output(out.coarse_image, out.detail_image);
  } else {
    out.composed = clamp01(out.detail_image);
  }
  return out;
}

}  // namespace rerender
