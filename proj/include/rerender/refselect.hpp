// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "rerender/keypoints.hpp"
#include "rerender/tensor.hpp"

namespace rerender {

// Grid-patch descriptors: the image is partitioned into kGridRows x kGridCols
// cells and each cell yields a mean-subtracted, l2-normalized intensity
// patch. Constant cells are degenerate and excluded from matching.
inline constexpr int kGridRows = 16;
inline constexpr int kGridCols = 8;

struct PatchDescriptor {
  std::vector<float> values;
  bool valid = false;
};

std::vector<PatchDescriptor> grid_descriptors(const Tensor& image);

// Mutual nearest neighbours with cosine similarity above the threshold.
// Deterministic substitute for an interest-point detector.
int count_matches(const std::vector<PatchDescriptor>& a,
                  const std::vector<PatchDescriptor>& b, float min_similarity = 0.8f);
int count_matches(const Tensor& image_a, const Tensor& image_b,
                  float min_similarity = 0.8f);

// Mean distance over jointly visible keypoints after aligning both sets'
// joint-visibility centroids to the origin, plus lambda_miss/25 for every
// keypoint visible in exactly one set. No jointly visible points -> +inf.
double keypoint_distance(const KeypointSet& a, const KeypointSet& b,
                         double lambda_miss = 0.2);

struct SelectionScore {
  double kp_distance = 0;       // with the missing-keypoint penalty folded in
  double missing_penalty = 0;   // the penalty part alone
  int match_count = 0;
  double combined(double mu = 0.5) const {
    return -kp_distance + mu * match_count / static_cast<double>(kGridRows * kGridCols);
  }
};

struct ReferenceCandidate {
  KeypointSet keypoints;
  std::vector<PatchDescriptor> descriptors;
};

SelectionScore score_reference(const KeypointSet& input_kps,
                               const std::vector<PatchDescriptor>& input_desc,
                               const ReferenceCandidate& candidate,
                               double lambda_miss = 0.2);

// Argmax over candidates of the combined score; ties break to the lowest
// index. Throws on an empty candidate list.
int select_reference(const KeypointSet& input_kps, const Tensor& input_image,
                     const std::vector<ReferenceCandidate>& candidates,
                     double lambda_miss = 0.2, double mu = 0.5);

}  // namespace rerender
