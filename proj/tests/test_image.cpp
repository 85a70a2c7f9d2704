// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "rerender/half.hpp"
#include "rerender/image.hpp"
#include "rerender/rng.hpp"
#include "test_util.hpp"

using namespace rerender;

TEST_CASE("png round-trip is exact for byte-quantized data") {
  Rng rng(17);
  Image img(3, 24, 18);
  for (auto& v : img.data)
    v = static_cast<float>(static_cast<int>(rng.next_below(256))) / 255.f;
  const std::string path = testutil::tmp_dir("png") + "/rt.png";
  write_png(path, img);
  Image back = read_png(path);
  REQUIRE(back.channels == 3);
  REQUIRE(back.height == 24);
  REQUIRE(back.width == 18);
  CHECK(back.data == img.data);
}

TEST_CASE("png grayscale and strip concat") {
  Image gray(1, 10, 8);
  for (size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = (i % 7) / 6.f;
  const std::string path = testutil::tmp_dir("png") + "/gray.png";
  write_png(path, gray);
  Image back = read_png(path);
  CHECK(back.channels == 1);
  CHECK(back.height == 10);

  Image a(3, 6, 4, 0.2f), b(3, 6, 5, 0.8f);
  Image strip = hconcat({a, b});
  CHECK(strip.width == 9);
  Image a2 = crop(strip, 0, 4);
  CHECK(a2.data == a.data);
  Image b2 = crop(strip, 4, 5);
  CHECK(b2.data == b.data);
}

TEST_CASE("half round-trip") {
  CHECK(round_through_half(0.f) == 0.f);
  CHECK(round_through_half(1.f) == 1.f);
  CHECK(round_through_half(-2.5f) == -2.5f);
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const float v = static_cast<float>(rng.uniform(-8.0, 8.0));
    const float r = round_through_half(v);
    CHECK(std::abs(r - v) <= std::abs(v) * 1e-3f + 1e-4f);
  }
  // Values beyond half range saturate to inf.
  CHECK(std::isinf(round_through_half(1e6f)));
}
