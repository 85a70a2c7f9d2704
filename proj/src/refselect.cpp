// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/refselect.hpp"

#include <cmath>
#include <limits>

namespace rerender {

std::vector<PatchDescriptor> grid_descriptors(const Tensor& image) {
  const Shape s = image.shape();
  RR_CHECK(s.n == 1, "grid_descriptors expects a single-sample tensor");
  RR_CHECK(s.h >= kGridRows && s.w >= kGridCols,
           "image too small for the descriptor grid: " << s.str());
  const int ch = s.h / kGridRows;
  const int cw = s.w / kGridCols;

  std::vector<PatchDescriptor> out(static_cast<size_t>(kGridRows) * kGridCols);
  for (int gy = 0; gy < kGridRows; ++gy) {
    for (int gx = 0; gx < kGridCols; ++gx) {
      PatchDescriptor& d = out[static_cast<size_t>(gy) * kGridCols + gx];
      d.values.resize(static_cast<size_t>(ch) * cw);
      double mean = 0;
      for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
          float inten = 0.f;
          for (int c = 0; c < s.c; ++c) inten += image.at(0, c, gy * ch + y, gx * cw + x);
          inten /= static_cast<float>(s.c);
          d.values[static_cast<size_t>(y) * cw + x] = inten;
          mean += inten;
        }
      }
      mean /= static_cast<double>(d.values.size());
      double sq = 0;
      for (auto& v : d.values) {
        v -= static_cast<float>(mean);
        sq += static_cast<double>(v) * v;
      }
      const double norm = std::sqrt(sq);
      if (norm < 1e-6) {
        d.valid = false;  // constant-intensity cell
        continue;
      }
      for (auto& v : d.values) v = static_cast<float>(v / norm);
      d.valid = true;
    }
  }
  return out;
}

namespace {

// Best match of d in set; ties break to the lowest index.
int nearest(const PatchDescriptor& d, const std::vector<PatchDescriptor>& set,
            float* best_sim) {
  int best = -1;
  float bs = -2.f;
  for (size_t j = 0; j < set.size(); ++j) {
    if (!set[j].valid) continue;
    float sim = 0.f;
    for (size_t k = 0; k < d.values.size(); ++k) sim += d.values[k] * set[j].values[k];
    if (sim > bs) {
      bs = sim;
      best = static_cast<int>(j);
    }
  }
  *best_sim = bs;
  return best;
}

}  // namespace

int count_matches(const std::vector<PatchDescriptor>& a,
                  const std::vector<PatchDescriptor>& b, float min_similarity) {
  RR_CHECK(a.size() == b.size(), "descriptor sets must come from equal grids");
  int matches = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].valid) continue;
    float sim_ab = 0.f;
    const int j = nearest(a[i], b, &sim_ab);
    if (j < 0 || sim_ab <= min_similarity) continue;
    float sim_ba = 0.f;
    const int back = nearest(b[static_cast<size_t>(j)], a, &sim_ba);
    if (back == static_cast<int>(i)) ++matches;
  }
  return matches;
}

int count_matches(const Tensor& image_a, const Tensor& image_b, float min_similarity) {
  RR_CHECK(image_a.shape() == image_b.shape(), "count_matches resolution mismatch");
  return count_matches(grid_descriptors(image_a), grid_descriptors(image_b), min_similarity);
}

double keypoint_distance(const KeypointSet& a, const KeypointSet& b, double lambda_miss) {
  int joint = 0, exactly_one = 0;
  double cax = 0, cay = 0, cbx = 0, cby = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& pa = a.pts[static_cast<size_t>(k)];
    const Keypoint& pb = b.pts[static_cast<size_t>(k)];
    if (pa.visible && pb.visible) {
      ++joint;
      cax += pa.x;
      cay += pa.y;
      cbx += pb.x;
      cby += pb.y;
    } else if (pa.visible != pb.visible) {
      ++exactly_one;
    }
  }
  if (joint == 0) return std::numeric_limits<double>::infinity();
  cax /= joint;
  cay /= joint;
  cbx /= joint;
  cby /= joint;

  double dist = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& pa = a.pts[static_cast<size_t>(k)];
    const Keypoint& pb = b.pts[static_cast<size_t>(k)];
    if (!(pa.visible && pb.visible)) continue;
    const double dx = (pa.x - cax) - (pb.x - cbx);
    const double dy = (pa.y - cay) - (pb.y - cby);
    dist += std::sqrt(dx * dx + dy * dy);
  }
  dist /= joint;
  return dist + lambda_miss * exactly_one / static_cast<double>(kNumKeypoints);
}

SelectionScore score_reference(const KeypointSet& input_kps,
                               const std::vector<PatchDescriptor>& input_desc,
                               const ReferenceCandidate& candidate, double lambda_miss) {
  SelectionScore s;
  int exactly_one = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (input_kps.pts[static_cast<size_t>(k)].visible !=
        candidate.keypoints.pts[static_cast<size_t>(k)].visible)
      ++exactly_one;
  }
  s.missing_penalty = lambda_miss * exactly_one / static_cast<double>(kNumKeypoints);
  s.kp_distance = keypoint_distance(input_kps, candidate.keypoints, lambda_miss);
  s.match_count = count_matches(input_desc, candidate.descriptors);
  return s;
}

int select_reference(const KeypointSet& input_kps, const Tensor& input_image,
                     const std::vector<ReferenceCandidate>& candidates, double lambda_miss,
                     double mu) {
  RR_CHECK(!candidates.empty(), "select_reference needs at least one candidate");
  const auto input_desc = grid_descriptors(input_image);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < candidates.size(); ++i) {
    const SelectionScore s = score_reference(input_kps, input_desc, candidates[i], lambda_miss);
    const double score = s.combined(mu);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace rerender
