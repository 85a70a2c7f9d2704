// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "rerender/refselect.hpp"
#include "rerender/rng.hpp"

using namespace rerender;

namespace {

Tensor textured_image(uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros({1, 3, 128, 64});
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

KeypointSet random_pose(uint64_t seed) {
  Rng rng(seed);
  KeypointSet k;
  for (auto& p : k.pts)
    p = {static_cast<float>(rng.uniform(-0.8, 0.8)),
         static_cast<float>(rng.uniform(-0.8, 0.8)), true};
  return k;
}

// Brute-force mutual nearest neighbours, written independently of the
// library implementation.
int brute_force_matches(const std::vector<PatchDescriptor>& a,
                        const std::vector<PatchDescriptor>& b, float min_sim) {
  auto sim = [](const PatchDescriptor& x, const PatchDescriptor& y) {
    float s = 0;
    for (size_t i = 0; i < x.values.size(); ++i) s += x.values[i] * y.values[i];
    return s;
  };
  int count = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].valid) continue;
    int best_j = -1;
    float best = -2;
    for (size_t j = 0; j < b.size(); ++j) {
      if (!b[j].valid) continue;
      const float s = sim(a[i], b[j]);
      if (s > best) {
        best = s;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j < 0 || best <= min_sim) continue;
    int back = -1;
    float best_back = -2;
    for (size_t j = 0; j < a.size(); ++j) {
      if (!a[j].valid) continue;
      const float s = sim(b[size_t(best_j)], a[j]);
      if (s > best_back) {
        best_back = s;
        back = static_cast<int>(j);
      }
    }
    if (back == static_cast<int>(i)) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("self-match counts every non-degenerate cell") {
  Tensor img = textured_image(1);
  const auto desc = grid_descriptors(img);
  int valid = 0;
  for (const auto& d : desc) valid += d.valid ? 1 : 0;
  CHECK(valid == kGridRows * kGridCols);  // noise has no constant cells
  CHECK(count_matches(desc, desc) == valid);

  // Constant image: all cells degenerate, zero matches.
  Tensor flat = Tensor::full({1, 3, 128, 64}, 0.4f);
  CHECK(count_matches(flat, flat) == 0);
}

TEST_CASE("independent noise rarely matches") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Tensor a = textured_image(100 + seed);
    Tensor b = textured_image(200 + seed);
    CHECK(count_matches(a, b) < kGridRows * kGridCols / 10);
  }
}

TEST_CASE("mutual-NN matching agrees with the brute-force oracle") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Tensor a = textured_image(300 + seed);
    Tensor b = textured_image(400 + seed);
    // Copy some cells from a into b so real matches exist.
    Rng rng(seed);
    for (int i = 0; i < 40; ++i) {
      const int cell = static_cast<int>(rng.next_below(kGridRows * kGridCols));
      const int gy = cell / kGridCols, gx = cell % kGridCols;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            b.at(0, c, gy * 8 + y, gx * 8 + x) = a.at(0, c, gy * 8 + y, gx * 8 + x);
    }
    const auto da = grid_descriptors(a), db = grid_descriptors(b);
    CHECK(count_matches(da, db) == brute_force_matches(da, db, 0.8f));
    CHECK(count_matches(da, db) > 0);
  }
}

TEST_CASE("keypoint distance: identity, hidden-point penalty, translation invariance") {
  KeypointSet pose = random_pose(7);
  CHECK(keypoint_distance(pose, pose) == doctest::Approx(0.0));

  KeypointSet one_hidden = pose;
  one_hidden.pts[4].visible = false;
  CHECK(keypoint_distance(pose, one_hidden, 0.2) == doctest::Approx(0.2 / 25.0));

  KeypointSet translated = pose;
  for (auto& p : translated.pts) {
    p.x += 0.15f;
    p.y -= 0.1f;
  }
  CHECK(keypoint_distance(pose, translated) == doctest::Approx(0.0).epsilon(1e-6));

  KeypointSet none;
  CHECK(std::isinf(keypoint_distance(pose, none)));
}

TEST_CASE("select_reference: dominance, ties, brute-force oracle") {
  KeypointSet pose = random_pose(9);
  Tensor input = textured_image(9);

  auto make_candidate = [&](const KeypointSet& k, const Tensor& img) {
    ReferenceCandidate c;
    c.keypoints = k;
    c.descriptors = grid_descriptors(img);
    return c;
  };

  // Far pose vs identical pose: the identical one wins.
  KeypointSet far = random_pose(77);
  std::vector<ReferenceCandidate> cands{make_candidate(far, textured_image(31)),
                                        make_candidate(pose, input)};
  CHECK(select_reference(pose, input, cands) == 1);

  // Two identical references tie-break to index 0.
  std::vector<ReferenceCandidate> twins{make_candidate(pose, input),
                                        make_candidate(pose, input)};
  CHECK(select_reference(pose, input, twins) == 0);

  CHECK_THROWS_AS((void)select_reference(pose, input, {}), ContractError);

  // Randomized instances agree with exhaustive scoring.
  for (uint64_t trial = 0; trial < 20; ++trial) {
    KeypointSet in_pose = random_pose(1000 + trial);
    Tensor in_img = textured_image(1000 + trial);
    const auto in_desc = grid_descriptors(in_img);
    std::vector<ReferenceCandidate> refs;
    for (uint64_t r = 0; r < 8; ++r)
      refs.push_back(
          make_candidate(random_pose(2000 + trial * 8 + r), textured_image(3000 + trial * 8 + r)));

    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < refs.size(); ++i) {
      const double s = score_reference(in_pose, in_desc, refs[i]).combined();
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(i);
      }
    }
    CHECK(select_reference(in_pose, in_img, refs) == best);
  }
}

TEST_CASE("selection is invariant to list permutation up to tie-break") {
  KeypointSet pose = random_pose(50);
  Tensor input = textured_image(50);
  std::vector<ReferenceCandidate> refs;
  for (uint64_t r = 0; r < 6; ++r) {
    ReferenceCandidate c;
    c.keypoints = random_pose(60 + r);
    c.descriptors = grid_descriptors(textured_image(70 + r));
    refs.push_back(std::move(c));
  }
  const int chosen = select_reference(pose, input, refs);
  std::vector<ReferenceCandidate> rotated(refs.begin() + 2, refs.end());
  rotated.insert(rotated.end(), refs.begin(), refs.begin() + 2);
  const int chosen_rot = select_reference(pose, input, rotated);
  // Same entry selected regardless of order.
  CHECK((chosen_rot + 2) % 6 == chosen);

  // Adding a strictly dominated reference never changes the winner.
  ReferenceCandidate dominated;
  dominated.keypoints = random_pose(999);  // far pose
  dominated.descriptors = grid_descriptors(Tensor::full({1, 3, 128, 64}, 0.5f));  // no matches
  std::vector<ReferenceCandidate> extended = refs;
  extended.push_back(std::move(dominated));
  CHECK(select_reference(pose, input, extended) == chosen);
}
