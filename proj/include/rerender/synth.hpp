// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rerender/image.hpp"
#include "rerender/keypoints.hpp"
#include "rerender/rng.hpp"

namespace rerender {

// One training/reference sample: clean render, binary mask, degraded input
// and the 25 keypoints for one (frame, view) pair.
struct ImageFrame {
  Image gt_image;        // 3 x H x W
  Image gt_mask;         // 1 x H x W, exactly {0, 1}
  Image rendered_input;  // 3 x H x W
  KeypointSet keypoints;
  int view_id = 0;
  int frame_id = 0;
  std::string subject_id;
};

// Background color shared by every generated image.
inline constexpr std::array<float, 3> kBackgroundColor{0.08f, 0.09f, 0.11f};

struct PartTexture {
  std::array<float, 3> base{};
  std::array<float, 3> second{};
  float stripe_freq = 3.f;   // cycles along the part axis
  float stripe_phase = 0.f;
  bool checker = false;
};

// Everything about a performer's look, fully determined by the seed.
struct SubjectSpec {
  uint64_t seed = 0;
  // Segment lengths/radii in physical units (canvas height = 2).
  float torso_len = 0.50f, torso_radius = 0.11f;
  float head_len = 0.10f, head_radius = 0.085f;
  float shoulder_offset = 0.12f;
  float upper_arm = 0.17f, forearm = 0.16f, arm_radius = 0.035f;
  float hip_offset = 0.07f;
  float thigh = 0.28f, shin = 0.26f, leg_radius = 0.042f;
  std::array<PartTexture, 10> textures{};  // torso, head, 4 arm segs, 4 leg segs

  static SubjectSpec from_seed(uint64_t seed);
};

// Joint angles in radians. Zero everywhere is the T-pose (arms straight out).
struct PoseParams {
  float shoulder_l = 0, shoulder_r = 0;  // 0 = horizontal, positive = down
  float elbow_l = 0, elbow_r = 0;        // bend relative to the upper arm
  float hip_l = 0, hip_r = 0;            // swing from vertical
  float knee_l = 0, knee_r = 0;          // bend
  float lean = 0;                        // whole-body tilt

  static PoseParams t_pose() { return {}; }
  static PoseParams a_pose();
  static PoseParams random(Rng& rng);
  static PoseParams blend(const PoseParams& a, const PoseParams& b, float t);
};

struct RenderResult {
  Image gt_image;
  Image gt_mask;
  KeypointSet keypoints;
};

// Rasterizes the articulated figure (10 textured capsules) rotated about its
// vertical axis by view * (360 / n_views) degrees via horizontal
// foreshortening. Self-occluded keypoints come back invisible.
RenderResult render_figure(const SubjectSpec& subject, const PoseParams& pose, int view,
                           int n_views, int h, int w);

struct DegradeConfig {
  int hole_count = 3;
  float hole_radius_min = 2.f;   // pixels
  float hole_radius_max = 5.f;
  float noise_sigma = 0.04f;
  float blur_sigma = 1.0f;
  float jitter = 0.02f;          // affine perturbation magnitude
  float color_shift = 0.06f;
};

// Produces the degraded rendered input: affine jitter, blur, holes filled
// with background inside the mask, additive noise, per-channel color shift
// (in that order). All-zero magnitudes return the clean image unchanged.
Image degrade(const Image& gt_image, const Image& gt_mask, const DegradeConfig& cfg,
              uint64_t seed);

// One shared random similarity transform (translation <= 5% width, rotation
// <= 10 degrees, scale in [0.9, 1.1]) applied to all images and keypoints.
ImageFrame augment(const ImageFrame& frame, uint64_t seed);

struct GenConfig {
  int n_subjects = 4;
  int frames_per_seq = 30;
  int n_views = 8;
  int ref_poses = 1;  // reference images per subject = ref_poses * n_views
  int height = 128;
  int width = 64;
  uint64_t seed = 1;
  DegradeConfig degrade;
  std::string out_dir;
};

struct FrameEntry {
  int frame_id = 0;  // pose index for references
  int view_id = 0;
  std::string png_path;   // relative to the dataset root
  std::string json_path;
  uint32_t crc32 = 0;
};

struct SubjectManifest {
  std::string id;
  uint64_t seed = 0;
  std::vector<FrameEntry> frames;
  std::vector<FrameEntry> refs;
};

struct DatasetManifest {
  int generator_version = 1;
  uint64_t global_seed = 0;
  int height = 0, width = 0, n_views = 0;
  DegradeConfig degrade;
  std::vector<SubjectManifest> subjects;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

// Renders and writes the whole dataset (PNG strips + JSON sidecars +
// manifest.json at the root) and returns the manifest.
DatasetManifest generate_dataset(const GenConfig& cfg);

// Strip panel order inside each PNG: clean render, degraded input, mask.
ImageFrame load_frame(const std::string& dataset_root, const FrameEntry& entry,
                      const std::string& subject_id);

struct SubjectData {
  std::string id;
  std::vector<ImageFrame> frames;
  std::vector<ImageFrame> refs;
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::string root;
  std::vector<SubjectData> subjects;

  const SubjectData* find_subject(const std::string& id) const;
};

LoadedDataset load_dataset(const std::string& root,
                           const std::vector<std::string>& subject_filter = {});

}  // namespace rerender
