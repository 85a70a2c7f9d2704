// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/synth.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace rerender {

namespace {

struct Vec2 {
  float x = 0, y = 0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(Vec2 a, float s) { return {a.x * s, a.y * s}; }

Vec2 rotate(Vec2 v, float angle) {
  const float c = std::cos(angle), s = std::sin(angle);
  return {v.x * c - v.y * s, v.x * s + v.y * c};
}

// Skeleton/keypoint math happens in "physical" coordinates: y in [-1, 1],
// x in [-aspect, aspect] with aspect = W/H, so distances are isotropic.
struct BodyPoint {
  Vec2 p;       // physical, after view rotation
  float z = 0;  // depth; smaller is closer to the camera
};

struct Capsule {
  BodyPoint a, b;
  float radius = 0;
  int texture = 0;
  float mean_z() const { return 0.5f * (a.z + b.z); }
};

struct FigureGeometry {
  std::vector<Capsule> parts;
  std::array<BodyPoint, kNumKeypoints> keypoints;
};

FigureGeometry build_figure(const SubjectSpec& s, const PoseParams& pose, float view_angle) {
  // Canonical joints in the body plane (x right, y down), z = 0.
  const Vec2 midhip{0.f, 0.18f};
  const Vec2 up{0.f, -1.f};

  auto lean_rot = [&](Vec2 v) { return rotate(v, pose.lean); };

  const Vec2 neck = midhip + lean_rot(up * s.torso_len);
  const Vec2 body_right = lean_rot({1.f, 0.f});
  const Vec2 body_down = lean_rot({0.f, 1.f});

  const Vec2 head_base = neck + lean_rot(up * 0.05f);
  const Vec2 head_top = head_base + lean_rot(up * s.head_len);
  const Vec2 head_center = (head_base + head_top) * 0.5f;

  const Vec2 sh_r = neck + body_right * s.shoulder_offset;
  const Vec2 sh_l = neck - body_right * s.shoulder_offset;

  // Arms: angle 0 points straight out (T-pose), positive rotates downward.
  const Vec2 arm_dir_r = rotate(body_right, pose.shoulder_r);
  const Vec2 arm_dir_l = rotate(body_right * -1.f, -pose.shoulder_l);
  const Vec2 el_r = sh_r + arm_dir_r * s.upper_arm;
  const Vec2 el_l = sh_l + arm_dir_l * s.upper_arm;
  const Vec2 fore_dir_r = rotate(arm_dir_r, pose.elbow_r);
  const Vec2 fore_dir_l = rotate(arm_dir_l, -pose.elbow_l);
  const Vec2 wr_r = el_r + fore_dir_r * s.forearm;
  const Vec2 wr_l = el_l + fore_dir_l * s.forearm;

  // Legs: angle 0 points straight down, positive swings outward.
  const Vec2 hip_r = midhip + body_right * s.hip_offset;
  const Vec2 hip_l = midhip - body_right * s.hip_offset;
  const Vec2 thigh_dir_r = rotate(body_down, -pose.hip_r);
  const Vec2 thigh_dir_l = rotate(body_down, pose.hip_l);
  const Vec2 knee_r = hip_r + thigh_dir_r * s.thigh;
  const Vec2 knee_l = hip_l + thigh_dir_l * s.thigh;
  const Vec2 shin_dir_r = rotate(thigh_dir_r, pose.knee_r);
  const Vec2 shin_dir_l = rotate(thigh_dir_l, -pose.knee_l);
  const Vec2 an_r = knee_r + shin_dir_r * s.shin;
  const Vec2 an_l = knee_l + shin_dir_l * s.shin;

  // View rotation about the vertical axis: foreshorten x, derive depth.
  const float cv = std::cos(view_angle), sv = std::sin(view_angle);
  auto project = [&](Vec2 p) { return BodyPoint{{p.x * cv, p.y}, p.x * sv}; };

  FigureGeometry g;
  g.parts = {
      {project(midhip), project(neck), s.torso_radius, 0},
      {project(head_base), project(head_top), s.head_radius, 1},
      {project(sh_r), project(el_r), s.arm_radius, 2},
      {project(el_r), project(wr_r), s.arm_radius, 3},
      {project(sh_l), project(el_l), s.arm_radius, 4},
      {project(el_l), project(wr_l), s.arm_radius, 5},
      {project(hip_r), project(knee_r), s.leg_radius, 6},
      {project(knee_r), project(an_r), s.leg_radius, 7},
      {project(hip_l), project(knee_l), s.leg_radius, 8},
      {project(knee_l), project(an_l), s.leg_radius, 9},
  };

  auto& kp = g.keypoints;
  kp[kNose] = project(head_center + lean_rot(up * 0.02f));
  kp[kNeck] = project(neck);
  kp[kRShoulder] = project(sh_r);
  kp[kRElbow] = project(el_r);
  kp[kRWrist] = project(wr_r);
  kp[kLShoulder] = project(sh_l);
  kp[kLElbow] = project(el_l);
  kp[kLWrist] = project(wr_l);
  kp[kMidHip] = project(midhip);
  kp[kRHip] = project(hip_r);
  kp[kRKnee] = project(knee_r);
  kp[kRAnkle] = project(an_r);
  kp[kLHip] = project(hip_l);
  kp[kLKnee] = project(knee_l);
  kp[kLAnkle] = project(an_l);
  kp[kREye] = project(head_center + body_right * 0.030f + lean_rot(up * 0.015f));
  kp[kLEye] = project(head_center - body_right * 0.030f + lean_rot(up * 0.015f));
  kp[kREar] = project(head_center + body_right * 0.055f);
  kp[kLEar] = project(head_center - body_right * 0.055f);
  kp[kLBigToe] = project(an_l + Vec2{-0.026f, 0.020f});
  kp[kLSmallToe] = project(an_l + Vec2{-0.034f, 0.014f});
  kp[kLHeel] = project(an_l + Vec2{0.018f, 0.020f});
  kp[kRBigToe] = project(an_r + Vec2{0.026f, 0.020f});
  kp[kRSmallToe] = project(an_r + Vec2{0.034f, 0.014f});
  kp[kRHeel] = project(an_r + Vec2{-0.018f, 0.020f});
  return g;
}

// Distance of p to segment ab and the axial parameter of the closest point.
float segment_distance(Vec2 p, Vec2 a, Vec2 b, float* t_out) {
  const Vec2 d = b - a;
  const float len2 = d.x * d.x + d.y * d.y;
  float t = 0.f;
  if (len2 > 1e-12f) {
    t = ((p.x - a.x) * d.x + (p.y - a.y) * d.y) / len2;
    t = std::clamp(t, 0.f, 1.f);
  }
  const Vec2 c = a + d * t;
  const float dx = p.x - c.x, dy = p.y - c.y;
  *t_out = t;
  return std::sqrt(dx * dx + dy * dy);
}

std::array<float, 3> part_color(const PartTexture& tex, float t, float side, float lateral) {
  bool second = std::sin(2.f * float(M_PI) * tex.stripe_freq * t + tex.stripe_phase) > 0.f;
  if (tex.checker && side > 0.f) second = !second;
  const std::array<float, 3>& c = second ? tex.second : tex.base;
  const float shade = 0.78f + 0.25f * (1.f - std::abs(lateral));
  return {std::clamp(c[0] * shade, 0.f, 1.f), std::clamp(c[1] * shade, 0.f, 1.f),
          std::clamp(c[2] * shade, 0.f, 1.f)};
}

}  // namespace

SubjectSpec SubjectSpec::from_seed(uint64_t seed) {
  SubjectSpec s;
  s.seed = seed;
  Rng rng = Rng::derive(seed, 0x5b17);

  auto vary = [&](float v) { return v * static_cast<float>(rng.uniform(0.92, 1.08)); };
  s.torso_len = vary(s.torso_len);
  s.torso_radius = vary(s.torso_radius);
  s.head_len = vary(s.head_len);
  s.head_radius = vary(s.head_radius);
  s.shoulder_offset = vary(s.shoulder_offset);
  s.upper_arm = vary(s.upper_arm);
  s.forearm = vary(s.forearm);
  s.hip_offset = vary(s.hip_offset);
  s.thigh = vary(s.thigh);
  s.shin = vary(s.shin);

  auto color = [&]() {
    return std::array<float, 3>{static_cast<float>(rng.uniform(0.15, 0.95)),
                                static_cast<float>(rng.uniform(0.15, 0.95)),
                                static_cast<float>(rng.uniform(0.15, 0.95))};
  };
  for (size_t i = 0; i < s.textures.size(); ++i) {
    PartTexture& t = s.textures[i];
    t.base = color();
    t.second = color();
    t.stripe_freq = static_cast<float>(rng.uniform(2.0, 6.0));
    t.stripe_phase = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
    t.checker = rng.uniform() < 0.3;
  }
  // Head reads better with subdued texture.
  s.textures[1].second = s.textures[1].base;
  return s;
}

PoseParams PoseParams::a_pose() {
  PoseParams p;
  p.shoulder_l = p.shoulder_r = 0.7f;
  return p;
}

PoseParams PoseParams::random(Rng& rng) {
  PoseParams p;
  auto u = [&](double lo, double hi) { return static_cast<float>(rng.uniform(lo, hi)); };
  p.shoulder_l = u(-0.25, 1.1);
  p.shoulder_r = u(-0.25, 1.1);
  p.elbow_l = u(0.0, 1.2);
  p.elbow_r = u(0.0, 1.2);
  p.hip_l = u(-0.25, 0.45);
  p.hip_r = u(-0.25, 0.45);
  p.knee_l = u(0.0, 0.7);
  p.knee_r = u(0.0, 0.7);
  p.lean = u(-0.12, 0.12);
  return p;
}

PoseParams PoseParams::blend(const PoseParams& a, const PoseParams& b, float t) {
  auto mix = [&](float x, float y) { return x + (y - x) * t; };
  PoseParams p;
  p.shoulder_l = mix(a.shoulder_l, b.shoulder_l);
  p.shoulder_r = mix(a.shoulder_r, b.shoulder_r);
  p.elbow_l = mix(a.elbow_l, b.elbow_l);
  p.elbow_r = mix(a.elbow_r, b.elbow_r);
  p.hip_l = mix(a.hip_l, b.hip_l);
  p.hip_r = mix(a.hip_r, b.hip_r);
  p.knee_l = mix(a.knee_l, b.knee_l);
  p.knee_r = mix(a.knee_r, b.knee_r);
  p.lean = mix(a.lean, b.lean);
  return p;
}

RenderResult render_figure(const SubjectSpec& subject, const PoseParams& pose, int view,
                           int n_views, int h, int w) {
  RR_CHECK(n_views >= 1 && view >= 0 && view < n_views, "view index out of range");
  RR_CHECK(h >= 16 && w >= 16, "render target too small");
  RR_CHECK(subject.torso_len > 0.05f && subject.upper_arm > 0.02f &&
               subject.thigh > 0.02f,
           "degenerate limb length");

  const float view_angle = static_cast<float>(2.0 * M_PI * view / n_views);
  FigureGeometry g = build_figure(subject, pose, view_angle);

  // Painter order: far parts first, near parts drawn over them.
  std::vector<int> order(g.parts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return g.parts[size_t(a)].mean_z() > g.parts[size_t(b)].mean_z();
  });

  RenderResult out;
  out.gt_image = Image(3, h, w);
  out.gt_mask = Image(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.gt_image.at(c, y, x) = kBackgroundColor[size_t(c)];

  const float aspect = static_cast<float>(w) / static_cast<float>(h);
  for (int y = 0; y < h; ++y) {
    const float py = pixel_to_norm(static_cast<float>(y), h);
    for (int x = 0; x < w; ++x) {
      const float px = pixel_to_norm(static_cast<float>(x), w) * aspect;
      for (const int pi : order) {
        const Capsule& cap = g.parts[size_t(pi)];
        float t = 0;
        const float d = segment_distance({px, py}, cap.a.p, cap.b.p, &t);
        if (d > cap.radius) continue;
        // Signed side of the axis for the checker pattern.
        const Vec2 axis = cap.b.p - cap.a.p;
        const float side = axis.x * (py - cap.a.p.y) - axis.y * (px - cap.a.p.x);
        const auto rgb = part_color(subject.textures[size_t(cap.texture)], t,
                                    side, d / cap.radius);
        for (int c = 0; c < 3; ++c) out.gt_image.at(c, y, x) = rgb[size_t(c)];
        out.gt_mask.at(0, y, x) = 1.f;
      }
    }
  }

  // Keypoint visibility: hidden when outside the canvas or covered by a part
  // clearly in front of it.
  constexpr float kDepthMargin = 0.05f;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const BodyPoint& bp = g.keypoints[size_t(k)];
    Keypoint kp;
    kp.x = bp.p.x / aspect;
    kp.y = bp.p.y;
    bool visible = kp.x > -1.f && kp.x < 1.f && kp.y > -1.f && kp.y < 1.f;
    if (visible) {
      for (const Capsule& cap : g.parts) {
        float t = 0;
        if (segment_distance(bp.p, cap.a.p, cap.b.p, &t) > cap.radius) continue;
        const float part_z = cap.a.z + t * (cap.b.z - cap.a.z);
        if (part_z < bp.z - kDepthMargin) {
          visible = false;
          break;
        }
      }
    }
    if (visible) {
      kp.visible = true;
    } else {
      kp = Keypoint{};  // sentinel coordinates
    }
    out.keypoints.pts[size_t(k)] = kp;
  }
  return out;
}

namespace {

Image affine_jitter(const Image& img, float rot, float scale, float tx, float ty) {
  const int h = img.height, w = img.width;
  Image out(img.channels, h, w);
  const float cx = (w - 1) * 0.5f, cy = (h - 1) * 0.5f;
  const float c = std::cos(rot) / scale, s = std::sin(rot) / scale;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse map: un-translate, un-rotate/scale about the center.
      const float dx = x - cx - tx, dy = y - cy - ty;
      const float sx = c * dx + s * dy + cx;
      const float sy = -s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const float wx = sx - x0, wy = sy - y0;
      for (int ch = 0; ch < img.channels; ++ch) {
        auto sample = [&](int yy, int xx) -> float {
          if (yy < 0 || yy >= h || xx < 0 || xx >= w)
            return img.channels == 3 ? kBackgroundColor[size_t(ch)] : 0.f;
          return img.at(ch, yy, xx);
        };
        out.at(ch, y, x) = (1 - wy) * ((1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1)) +
                           wy * ((1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1));
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, float sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5f * sigma)));
  std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
  float sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[size_t(i + radius)] = std::exp(-0.5f * i * i / (sigma * sigma));
    sum += kernel[size_t(i + radius)];
  }
  for (auto& k : kernel) k /= sum;

  const int h = img.height, w = img.width;
  Image tmp(img.channels, h, w), out(img.channels, h, w);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[size_t(i + radius)] * img.at(ch, y, std::clamp(x + i, 0, w - 1));
        tmp.at(ch, y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[size_t(i + radius)] * tmp.at(ch, std::clamp(y + i, 0, h - 1), x);
        out.at(ch, y, x) = acc;
      }
  }
  return out;
}

}  // namespace

Image degrade(const Image& gt_image, const Image& gt_mask, const DegradeConfig& cfg,
              uint64_t seed) {
  RR_CHECK(gt_image.channels == 3 && gt_mask.channels == 1, "degrade expects rgb + mask");
  Rng rng = Rng::derive(seed, 0xde62);
  Image img = gt_image;
  const int h = img.height, w = img.width;

  if (cfg.jitter > 0.f) {
    const float rot = static_cast<float>(rng.uniform(-1, 1)) * cfg.jitter * 0.9f;
    const float scale = 1.f + static_cast<float>(rng.uniform(-1, 1)) * cfg.jitter * 0.5f;
    const float tx = static_cast<float>(rng.uniform(-1, 1)) * cfg.jitter * 0.25f * w;
    const float ty = static_cast<float>(rng.uniform(-1, 1)) * cfg.jitter * 0.25f * w;
    img = affine_jitter(img, rot, scale, tx, ty);
  }

  if (cfg.blur_sigma > 0.f) img = gaussian_blur(img, cfg.blur_sigma);

  for (int i = 0; i < cfg.hole_count; ++i) {
    // Geometry artifacts: elliptical dropouts inside the figure.
    int cx = -1, cy = -1;
    for (int attempt = 0; attempt < 30; ++attempt) {
      const int x = static_cast<int>(rng.next_below(static_cast<uint64_t>(w)));
      const int y = static_cast<int>(rng.next_below(static_cast<uint64_t>(h)));
      if (gt_mask.at(0, y, x) > 0.5f) {
        cx = x;
        cy = y;
        break;
      }
    }
    if (cx < 0) continue;
    const float rx = static_cast<float>(rng.uniform(cfg.hole_radius_min, cfg.hole_radius_max));
    const float ry = static_cast<float>(rng.uniform(cfg.hole_radius_min, cfg.hole_radius_max));
    for (int y = std::max(0, cy - int(ry) - 1); y <= std::min(h - 1, cy + int(ry) + 1); ++y) {
      for (int x = std::max(0, cx - int(rx) - 1); x <= std::min(w - 1, cx + int(rx) + 1); ++x) {
        const float ex = (x - cx) / rx, ey = (y - cy) / ry;
        if (ex * ex + ey * ey > 1.f) continue;
        if (gt_mask.at(0, y, x) < 0.5f) continue;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = kBackgroundColor[size_t(c)];
      }
    }
  }

  if (cfg.noise_sigma > 0.f) {
    for (auto& v : img.data)
      v = std::clamp(v + cfg.noise_sigma * static_cast<float>(rng.normal()), 0.f, 1.f);
  }

  if (cfg.color_shift > 0.f) {
    for (int c = 0; c < 3; ++c) {
      const float gain = 1.f + static_cast<float>(rng.uniform(-1, 1)) * cfg.color_shift;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(c, y, x) = std::clamp(img.at(c, y, x) * gain, 0.f, 1.f);
    }
  }
  return img;
}

ImageFrame augment(const ImageFrame& frame, uint64_t seed) {
  Rng rng = Rng::derive(seed, 0xa462);
  const int h = frame.gt_image.height, w = frame.gt_image.width;
  const float tx = static_cast<float>(rng.uniform(-1, 1)) * 0.05f * w;
  const float ty = static_cast<float>(rng.uniform(-1, 1)) * 0.05f * w;
  const float rot = static_cast<float>(rng.uniform(-1, 1)) * 10.f * float(M_PI) / 180.f;
  const float scale = static_cast<float>(rng.uniform(0.9, 1.1));

  if (tx == 0.f && ty == 0.f && rot == 0.f && scale == 1.f) return frame;

  ImageFrame out = frame;
  out.gt_image = affine_jitter(frame.gt_image, rot, scale, tx, ty);
  out.rendered_input = affine_jitter(frame.rendered_input, rot, scale, tx, ty);
  Image warped_mask = affine_jitter(frame.gt_mask, rot, scale, tx, ty);
  for (auto& v : warped_mask.data) v = v > 0.5f ? 1.f : 0.f;
  out.gt_mask = warped_mask;

  // The same transform, applied forward, in pixel space.
  const float cx = (w - 1) * 0.5f, cy = (h - 1) * 0.5f;
  const float c = std::cos(rot) * scale, s = std::sin(rot) * scale;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& p = frame.keypoints.pts[size_t(k)];
    if (!p.visible) {
      out.keypoints.pts[size_t(k)] = Keypoint{};
      continue;
    }
    const float px = norm_to_pixel(p.x, w), py = norm_to_pixel(p.y, h);
    const float dx = px - cx, dy = py - cy;
    const float qx = c * dx - s * dy + cx + tx;
    const float qy = s * dx + c * dy + cy + ty;
    Keypoint q;
    q.x = pixel_to_norm(qx, w);
    q.y = pixel_to_norm(qy, h);
    q.visible = q.x > -1.f && q.x < 1.f && q.y > -1.f && q.y < 1.f;
    if (!q.visible) q = Keypoint{};
    out.keypoints.pts[size_t(k)] = q;
  }
  return out;
}

namespace {

using nlohmann::json;

json degrade_to_json(const DegradeConfig& d) {
  return json{{"hole_count", d.hole_count},
              {"hole_radius_min", d.hole_radius_min},
              {"hole_radius_max", d.hole_radius_max},
              {"noise_sigma", d.noise_sigma},
              {"blur_sigma", d.blur_sigma},
              {"jitter", d.jitter},
              {"color_shift", d.color_shift}};
}

DegradeConfig degrade_from_json(const json& j) {
  DegradeConfig d;
  d.hole_count = j.at("hole_count").get<int>();
  d.hole_radius_min = j.at("hole_radius_min").get<float>();
  d.hole_radius_max = j.at("hole_radius_max").get<float>();
  d.noise_sigma = j.at("noise_sigma").get<float>();
  d.blur_sigma = j.at("blur_sigma").get<float>();
  d.jitter = j.at("jitter").get<float>();
  d.color_shift = j.at("color_shift").get<float>();
  return d;
}

json entry_to_json(const FrameEntry& e) {
  return json{{"frame", e.frame_id},
              {"view", e.view_id},
              {"png", e.png_path},
              {"json", e.json_path},
              {"crc32", e.crc32}};
}

FrameEntry entry_from_json(const json& j) {
  FrameEntry e;
  e.frame_id = j.at("frame").get<int>();
  e.view_id = j.at("view").get<int>();
  e.png_path = j.at("png").get<std::string>();
  e.json_path = j.at("json").get<std::string>();
  e.crc32 = j.at("crc32").get<uint32_t>();
  return e;
}

uint32_t file_crc32(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  RR_RUNTIME_CHECK(is.good(), "cannot open: " << path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  return static_cast<uint32_t>(
      ::crc32(0, reinterpret_cast<const unsigned char*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

void write_sidecar(const std::string& path, const std::string& subject, int frame, int view,
                   const KeypointSet& kps) {
  json j;
  j["subject"] = subject;
  j["frame"] = frame;
  j["view"] = view;
  j["panels"] = {"gt", "input", "mask"};
  json arr = json::array();
  for (const auto& p : kps.pts)
    arr.push_back(json::array({p.x, p.y, p.visible ? 1 : 0}));
  j["keypoints"] = arr;
  std::ofstream os(path, std::ios::trunc);
  RR_RUNTIME_CHECK(os.good(), "cannot open for writing: " << path);
  os << j.dump();
  RR_RUNTIME_CHECK(os.good(), "write failed: " << path);
}

KeypointSet sidecar_keypoints(const std::string& path) {
  std::ifstream is(path);
  RR_RUNTIME_CHECK(is.good(), "cannot open: " << path);
  json j = json::parse(is);
  KeypointSet out;
  const auto& arr = j.at("keypoints");
  RR_RUNTIME_CHECK(arr.size() == kNumKeypoints, "bad keypoint count in " << path);
  for (size_t k = 0; k < kNumKeypoints; ++k) {
    Keypoint p;
    p.x = arr[k][0].get<float>();
    p.y = arr[k][1].get<float>();
    p.visible = arr[k][2].get<int>() != 0;
    out.pts[k] = p;
  }
  return out;
}

Image mask_to_rgb(const Image& mask) {
  Image out(3, mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = mask.at(0, y, x);
  return out;
}

// Reference poses: canonical stances (T-pose, A-pose and blends in between)
// with a slight deterministic leg variation per pose index.
PoseParams reference_pose(int pose_index, int pose_count) {
  const float t = pose_count <= 1
                      ? 0.f
                      : static_cast<float>(pose_index) / static_cast<float>(pose_count - 1);
  PoseParams p = PoseParams::blend(PoseParams::t_pose(), PoseParams::a_pose(), t);
  p.hip_l = 0.06f * pose_index;
  p.hip_r = 0.06f * pose_index;
  return p;
}

}  // namespace

std::string DatasetManifest::to_json() const {
  json j;
  j["generator_version"] = generator_version;
  j["global_seed"] = global_seed;
  j["height"] = height;
  j["width"] = width;
  j["n_views"] = n_views;
  j["degrade"] = degrade_to_json(degrade);
  json subj = json::array();
  for (const auto& s : subjects) {
    json js;
    js["id"] = s.id;
    js["seed"] = s.seed;
    json fr = json::array(), rf = json::array();
    for (const auto& e : s.frames) fr.push_back(entry_to_json(e));
    for (const auto& e : s.refs) rf.push_back(entry_to_json(e));
    js["frames"] = fr;
    js["refs"] = rf;
    subj.push_back(js);
  }
  j["subjects"] = subj;
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.generator_version = j.at("generator_version").get<int>();
  m.global_seed = j.at("global_seed").get<uint64_t>();
  m.height = j.at("height").get<int>();
  m.width = j.at("width").get<int>();
  m.n_views = j.at("n_views").get<int>();
  m.degrade = degrade_from_json(j.at("degrade"));
  for (const auto& js : j.at("subjects")) {
    SubjectManifest s;
    s.id = js.at("id").get<std::string>();
    s.seed = js.at("seed").get<uint64_t>();
    for (const auto& e : js.at("frames")) s.frames.push_back(entry_from_json(e));
    for (const auto& e : js.at("refs")) s.refs.push_back(entry_from_json(e));
    m.subjects.push_back(std::move(s));
  }
  return m;
}

DatasetManifest generate_dataset(const GenConfig& cfg) {
  RR_CHECK(cfg.n_subjects >= 1 && cfg.frames_per_seq >= 1 && cfg.n_views >= 1 &&
               cfg.ref_poses >= 1,
           "dataset generation needs positive counts");
  RR_CHECK(!cfg.out_dir.empty(), "output directory required");
  RR_CHECK(cfg.height % 16 == 0 && cfg.width % 16 == 0,
           "resolution must be divisible by 16");

  fs::create_directories(cfg.out_dir);

  DatasetManifest manifest;
  manifest.global_seed = cfg.seed;
  manifest.height = cfg.height;
  manifest.width = cfg.width;
  manifest.n_views = cfg.n_views;
  manifest.degrade = cfg.degrade;

  char buf[64];
  for (int si = 0; si < cfg.n_subjects; ++si) {
    SubjectManifest sm;
    sm.id = "subj" + std::to_string(si);
    sm.seed = Rng::derive(cfg.seed, 0x50b2, static_cast<uint64_t>(si)).next_u64();
    const SubjectSpec subject = SubjectSpec::from_seed(sm.seed);

    const fs::path subj_dir = fs::path(cfg.out_dir) / sm.id;
    fs::create_directories(subj_dir / "seq");
    fs::create_directories(subj_dir / "ref");

    // Smooth motion: waypoint poses every few frames, cosine-interpolated.
    const int waypoint_gap = 8;
    const int n_waypoints = cfg.frames_per_seq / waypoint_gap + 2;
    std::vector<PoseParams> waypoints;
    for (int wi = 0; wi < n_waypoints; ++wi) {
      Rng rng = Rng::derive(cfg.seed, 0x905e, static_cast<uint64_t>(si),
                            static_cast<uint64_t>(wi));
      waypoints.push_back(PoseParams::random(rng));
    }

    for (int f = 0; f < cfg.frames_per_seq; ++f) {
      const int seg = f / waypoint_gap;
      const float raw_t = static_cast<float>(f % waypoint_gap) / waypoint_gap;
      const float t = 0.5f - 0.5f * std::cos(raw_t * float(M_PI));
      const PoseParams pose =
          PoseParams::blend(waypoints[size_t(seg)], waypoints[size_t(seg) + 1], t);

      for (int v = 0; v < cfg.n_views; ++v) {
        RenderResult r = render_figure(subject, pose, v, cfg.n_views, cfg.height, cfg.width);
        const uint64_t dseed = Rng::derive(cfg.seed, 0xd364, static_cast<uint64_t>(si),
                                           static_cast<uint64_t>(f) * 1000 + v)
                                   .next_u64();
        Image input = degrade(r.gt_image, r.gt_mask, cfg.degrade, dseed);

        std::snprintf(buf, sizeof buf, "%04d_%d", f, v);
        FrameEntry e;
        e.frame_id = f;
        e.view_id = v;
        e.png_path = sm.id + "/seq/" + buf + ".png";
        e.json_path = sm.id + "/seq/" + buf + ".json";
        const std::string png_abs = (fs::path(cfg.out_dir) / e.png_path).string();
        write_png(png_abs, hconcat({r.gt_image, input, mask_to_rgb(r.gt_mask)}));
        write_sidecar((fs::path(cfg.out_dir) / e.json_path).string(), sm.id, f, v,
                      r.keypoints);
        e.crc32 = file_crc32(png_abs);
        sm.frames.push_back(e);
      }
    }

    for (int p = 0; p < cfg.ref_poses; ++p) {
      const PoseParams pose = reference_pose(p, cfg.ref_poses);
      for (int v = 0; v < cfg.n_views; ++v) {
        RenderResult r = render_figure(subject, pose, v, cfg.n_views, cfg.height, cfg.width);
        std::snprintf(buf, sizeof buf, "%04d_%d", p, v);
        FrameEntry e;
        e.frame_id = p;
        e.view_id = v;
        e.png_path = sm.id + "/ref/" + buf + ".png";
        e.json_path = sm.id + "/ref/" + buf + ".json";
        const std::string png_abs = (fs::path(cfg.out_dir) / e.png_path).string();
        // References are captured clean; the input panel repeats the render.
        write_png(png_abs, hconcat({r.gt_image, r.gt_image, mask_to_rgb(r.gt_mask)}));
        write_sidecar((fs::path(cfg.out_dir) / e.json_path).string(), sm.id, p, v,
                      r.keypoints);
        e.crc32 = file_crc32(png_abs);
        sm.refs.push_back(e);
      }
    }

    manifest.subjects.push_back(std::move(sm));
  }

  const std::string manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
  std::ofstream os(manifest_path, std::ios::trunc);
  RR_RUNTIME_CHECK(os.good(), "cannot open for writing: " << manifest_path);
  os << manifest.to_json();
  RR_RUNTIME_CHECK(os.good(), "write failed: " << manifest_path);
  return manifest;
}

ImageFrame load_frame(const std::string& dataset_root, const FrameEntry& entry,
                      const std::string& subject_id) {
  const std::string png = (fs::path(dataset_root) / entry.png_path).string();
  Image strip = read_png(png);
  RR_RUNTIME_CHECK(strip.width % 3 == 0, "frame strip width not divisible by 3: " << png);
  const int w = strip.width / 3;

  ImageFrame frame;
  frame.gt_image = crop(strip, 0, w);
  frame.rendered_input = crop(strip, w, w);
  Image mask_rgb = crop(strip, 2 * w, w);
  frame.gt_mask = Image(1, strip.height, w);
  for (int y = 0; y < strip.height; ++y)
    for (int x = 0; x < w; ++x)
      frame.gt_mask.at(0, y, x) = mask_rgb.at(0, y, x) > 0.5f ? 1.f : 0.f;
  frame.keypoints =
      sidecar_keypoints((fs::path(dataset_root) / entry.json_path).string());
  frame.frame_id = entry.frame_id;
  frame.view_id = entry.view_id;
  frame.subject_id = subject_id;
  return frame;
}

const SubjectData* LoadedDataset::find_subject(const std::string& id) const {
  for (const auto& s : subjects)
    if (s.id == id) return &s;
  return nullptr;
}

LoadedDataset load_dataset(const std::string& root,
                           const std::vector<std::string>& subject_filter) {
  const std::string manifest_path = (fs::path(root) / "manifest.json").string();
  std::ifstream is(manifest_path);
  RR_RUNTIME_CHECK(is.good(), "dataset manifest not found: " << manifest_path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  LoadedDataset ds;
  ds.manifest = DatasetManifest::from_json(text);
  ds.root = root;
  for (const auto& sm : ds.manifest.subjects) {
    if (!subject_filter.empty() &&
        std::find(subject_filter.begin(), subject_filter.end(), sm.id) ==
            subject_filter.end())
      continue;
    SubjectData sd;
    sd.id = sm.id;
    for (const auto& e : sm.frames) sd.frames.push_back(load_frame(root, e, sm.id));
    for (const auto& e : sm.refs) sd.refs.push_back(load_frame(root, e, sm.id));
    ds.subjects.push_back(std::move(sd));
  }
  return ds;
}

}  // namespace rerender
