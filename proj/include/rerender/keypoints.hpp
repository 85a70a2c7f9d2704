// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

#include "rerender/tensor.hpp"

namespace rerender {

// 25-point body keypoint layout (OpenPose BODY_25 ordering).
inline constexpr int kNumKeypoints = 25;

enum BodyKeypoint : int {
  kNose = 0,
  kNeck = 1,
  kRShoulder = 2,
  kRElbow = 3,
  kRWrist = 4,
  kLShoulder = 5,
  kLElbow = 6,
  kLWrist = 7,
  kMidHip = 8,
  kRHip = 9,
  kRKnee = 10,
  kRAnkle = 11,
  kLHip = 12,
  kLKnee = 13,
  kLAnkle = 14,
  kREye = 15,
  kLEye = 16,
  kREar = 17,
  kLEar = 18,
  kLBigToe = 19,
  kLSmallToe = 20,
  kLHeel = 21,
  kRBigToe = 22,
  kRSmallToe = 23,
  kRHeel = 24,
};

struct Keypoint {
  float x = -2.f;  // normalized [-1, 1]; invisible points carry the sentinel
  float y = -2.f;
  bool visible = false;
};

struct KeypointSet {
  std::array<Keypoint, kNumKeypoints> pts;

  int visible_count() const {
    int n = 0;
    for (const auto& p : pts) n += p.visible ? 1 : 0;
    return n;
  }
};

// Per-keypoint Gaussian bump heatmap, peak 1 at the keypoint, zero channels
// for invisible points. Output is (1, 25, h, w); sigma is in pixels.
Tensor keypoints_to_heatmaps(const KeypointSet& kps, int h, int w, float sigma);

// Heatmap sigma used throughout: 5% of the quarter-resolution height.
inline float heatmap_sigma(int quarter_h) { return 0.05f * static_cast<float>(quarter_h); }

// Pixel center of a normalized coordinate (align-corners-false convention).
inline float norm_to_pixel(float v, int size) {
  return (v + 1.f) * 0.5f * static_cast<float>(size) - 0.5f;
}
inline float pixel_to_norm(float p, int size) {
  return (2.f * p + 1.f) / static_cast<float>(size) - 1.f;
}

}  // namespace rerender
