// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rerender/metrics.hpp"
#include "rerender/synth.hpp"
#include "test_util.hpp"

using namespace rerender;
namespace fs = std::filesystem;

namespace {

ImageFrame make_frame(uint64_t subject_seed, int frame, int view, bool degrade_input = true) {
  const SubjectSpec subject = SubjectSpec::from_seed(subject_seed);
  Rng rng = Rng::derive(subject_seed, 99, static_cast<uint64_t>(frame));
  const PoseParams pose = PoseParams::random(rng);
  RenderResult r = render_figure(subject, pose, view, 8, 128, 64);
  ImageFrame f;
  f.gt_image = r.gt_image;
  f.gt_mask = r.gt_mask;
  f.keypoints = r.keypoints;
  f.rendered_input =
      degrade_input ? degrade(r.gt_image, r.gt_mask, DegradeConfig{}, subject_seed + frame)
                    : r.gt_image;
  f.frame_id = frame;
  f.view_id = view;
  f.subject_id = "s";
  return f;
}

}  // namespace

TEST_CASE("t-pose front view puts wrists at maximal horizontal extent") {
  const SubjectSpec subject = SubjectSpec::from_seed(5);
  RenderResult r = render_figure(subject, PoseParams::t_pose(), 0, 8, 128, 64);
  const auto& pts = r.keypoints.pts;
  REQUIRE(pts[kRWrist].visible);
  REQUIRE(pts[kLWrist].visible);
  float max_x = -2.f, min_x = 2.f;
  for (const auto& p : pts) {
    if (!p.visible) continue;
    max_x = std::max(max_x, p.x);
    min_x = std::min(min_x, p.x);
  }
  CHECK(pts[kRWrist].x == doctest::Approx(max_x));
  CHECK(pts[kLWrist].x == doctest::Approx(min_x));
}

TEST_CASE("figure mask is neither empty nor full-frame") {
  const SubjectSpec subject = SubjectSpec::from_seed(6);
  for (int view = 0; view < 8; ++view) {
    Rng rng(view + 1);
    RenderResult r = render_figure(subject, PoseParams::random(rng), view, 8, 128, 64);
    int on = 0;
    for (const float v : r.gt_mask.data) on += v > 0.5f ? 1 : 0;
    CHECK(on > 0);
    CHECK(on < 128 * 64);
  }
}

TEST_CASE("render_figure is deterministic") {
  const SubjectSpec subject = SubjectSpec::from_seed(7);
  Rng rng(3);
  const PoseParams pose = PoseParams::random(rng);
  RenderResult a = render_figure(subject, pose, 3, 8, 128, 64);
  RenderResult b = render_figure(subject, pose, 3, 8, 128, 64);
  CHECK(a.gt_image.data == b.gt_image.data);
  CHECK(a.gt_mask.data == b.gt_mask.data);
  for (int k = 0; k < kNumKeypoints; ++k) {
    CHECK(a.keypoints.pts[size_t(k)].x == b.keypoints.pts[size_t(k)].x);
    CHECK(a.keypoints.pts[size_t(k)].visible == b.keypoints.pts[size_t(k)].visible);
  }
}

TEST_CASE("visible keypoints land inside the dilated mask") {
  int checked = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const SubjectSpec subject = SubjectSpec::from_seed(seed);
    for (int f = 0; f < 5; ++f) {
      Rng rng = Rng::derive(seed, 4, static_cast<uint64_t>(f));
      const PoseParams pose = PoseParams::random(rng);
      for (int view = 0; view < 8; view += 2) {
        RenderResult r = render_figure(subject, pose, view, 8, 128, 64);
        for (const auto& p : r.keypoints.pts) {
          if (!p.visible) continue;
          const int px = static_cast<int>(std::lround(norm_to_pixel(p.x, 64)));
          const int py = static_cast<int>(std::lround(norm_to_pixel(p.y, 128)));
          bool inside = false;
          for (int dy = -3; dy <= 3 && !inside; ++dy)
            for (int dx = -3; dx <= 3 && !inside; ++dx) {
              const int x = px + dx, y = py + dy;
              if (x < 0 || x >= 64 || y < 0 || y >= 128) continue;
              inside = r.gt_mask.at(0, y, x) > 0.5f;
            }
          CHECK(inside);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("degrade with zero magnitudes is the identity") {
  const ImageFrame f = make_frame(21, 0, 0, false);
  DegradeConfig cfg;
  cfg.hole_count = 0;
  cfg.noise_sigma = 0;
  cfg.blur_sigma = 0;
  cfg.jitter = 0;
  cfg.color_shift = 0;
  Image out = degrade(f.gt_image, f.gt_mask, cfg, 5);
  CHECK(out.data == f.gt_image.data);
}

TEST_CASE("degrade is deterministic and immutable on inputs") {
  const ImageFrame f = make_frame(22, 0, 0, false);
  const std::vector<float> gt_copy = f.gt_image.data;
  Image a = degrade(f.gt_image, f.gt_mask, DegradeConfig{}, 40);
  Image b = degrade(f.gt_image, f.gt_mask, DegradeConfig{}, 40);
  Image c = degrade(f.gt_image, f.gt_mask, DegradeConfig{}, 41);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  CHECK(f.gt_image.data == gt_copy);
}

TEST_CASE("holes strictly reduce PSNR") {
  const ImageFrame f = make_frame(23, 1, 0, false);
  DegradeConfig holes_only;
  holes_only.noise_sigma = 0;
  holes_only.blur_sigma = 0;
  holes_only.jitter = 0;
  holes_only.color_shift = 0;
  holes_only.hole_count = 5;
  Image holed = degrade(f.gt_image, f.gt_mask, holes_only, 7);
  const double p = psnr(holed, f.gt_image);
  CHECK(std::isfinite(p));
  CHECK(p < kPsnrCap);
}

TEST_CASE("default degradation lands in the 15-30 dB band") {
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    const ImageFrame f = make_frame(seed * 13, static_cast<int>(seed), int(seed % 8), false);
    Image degraded = degrade(f.gt_image, f.gt_mask, DegradeConfig{}, seed);
    const double p = psnr(degraded, f.gt_image);
    INFO("seed ", seed, " psnr ", p);
    CHECK(p >= 15.0);
    CHECK(p <= 30.0);
  }
}

TEST_CASE("augment keeps keypoints on their texture landmarks") {
  const ImageFrame f = make_frame(31, 2, 0, false);
  const ImageFrame g = augment(f, 77);

  // Mask stays binary.
  for (const float v : g.gt_mask.data) CHECK((v == 0.f || v == 1.f));

  // The patch at each transformed keypoint should correlate with the source
  // patch better than a deliberately displaced one: the keypoints move with
  // the texture, not away from it.
  auto ncc = [&](int px, int py, int qx, int qy) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const double a = f.gt_image.at(0, py + dy, px + dx);
        const double b = g.gt_image.at(0, qy + dy, qx + dx);
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
      }
    const double n = 25.0;
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
    if (va < 1e-4 || vb < 1e-4) return -2.0;  // flat patch, no signal
    return cov / std::sqrt(va * vb);
  };

  int tracked = 0, on_landmark = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& p = f.keypoints.pts[size_t(k)];
    const Keypoint& q = g.keypoints.pts[size_t(k)];
    if (!p.visible || !q.visible) continue;
    const int px = static_cast<int>(std::lround(norm_to_pixel(p.x, 64)));
    const int py = static_cast<int>(std::lround(norm_to_pixel(p.y, 128)));
    const int qx = static_cast<int>(std::lround(norm_to_pixel(q.x, 64)));
    const int qy = static_cast<int>(std::lround(norm_to_pixel(q.y, 128)));
    if (px < 3 || px >= 61 || py < 3 || py >= 125) continue;
    if (qx < 3 || qx >= 57 || qy < 3 || qy >= 119) continue;
    const double here = ncc(px, py, qx, qy);
    const double displaced = ncc(px, py, qx + 4, qy + 5);
    if (here == -2.0) continue;
    ++tracked;
    if (here > 0.3 && here > displaced) ++on_landmark;
  }
  REQUIRE(tracked >= 5);
  CHECK(on_landmark >= (tracked * 4) / 5);
}

TEST_CASE("dataset generation counts files and reproduces bitwise") {
  const std::string dir_a = testutil::tmp_dir("gen_a");
  const std::string dir_b = testutil::tmp_dir("gen_b");
  GenConfig cfg;
  cfg.n_subjects = 2;
  cfg.frames_per_seq = 3;
  cfg.n_views = 2;
  cfg.ref_poses = 2;
  cfg.seed = 123;
  cfg.out_dir = dir_a;
  DatasetManifest ma = generate_dataset(cfg);
  cfg.out_dir = dir_b;
  DatasetManifest mb = generate_dataset(cfg);

  REQUIRE(ma.subjects.size() == 2);
  for (const auto& s : ma.subjects) {
    CHECK(s.frames.size() == 3 * 2);
    CHECK(s.refs.size() == 2 * 2);
    for (const auto& e : s.frames) CHECK(fs::exists(fs::path(dir_a) / e.png_path));
  }
  CHECK(ma.to_json() == mb.to_json());

  // Reload round-trip preserves ordering and content hashes.
  std::ifstream is(fs::path(dir_a) / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  DatasetManifest reloaded = DatasetManifest::from_json(text);
  CHECK(reloaded.to_json() == ma.to_json());

  LoadedDataset ds = load_dataset(dir_a);
  REQUIRE(ds.subjects.size() == 2);
  CHECK(ds.subjects[0].frames.size() == 6);
  CHECK(ds.subjects[0].refs.size() == 4);
  const ImageFrame& f = ds.subjects[0].frames[0];
  CHECK(f.gt_image.height == 128);
  CHECK(f.gt_image.width == 64);
  for (const float v : f.gt_mask.data) CHECK((v == 0.f || v == 1.f));
}
