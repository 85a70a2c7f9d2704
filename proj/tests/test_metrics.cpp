// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "rerender/metrics.hpp"
#include "rerender/rng.hpp"

using namespace rerender;

namespace {

Image random_image(int c, int h, int w, uint64_t seed) {
  Rng rng(seed);
  Image img(c, h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  return img;
}

}  // namespace

TEST_CASE("psnr/mse: identity, exact 20 dB offset case, brute-force oracle") {
  Image a = random_image(3, 16, 16, 1);
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(a, a) == kPsnrCap);

  // Constant offset 0.1 -> MSE 0.01 -> 20 dB (to float32 representation of
  // the 0.1 offset; the PSNR<->MSE identity itself is exact).
  Image base(3, 16, 16, 0.4f);
  Image off(3, 16, 16, 0.5f);
  const double m01 = mse(base, off);
  CHECK(m01 == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(psnr(base, off) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(base, off) == doctest::Approx(10.0 * std::log10(1.0 / m01)).epsilon(1e-13));

  Image b = random_image(3, 16, 16, 2);
  double ref = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - b.data[i];
    ref += d * d;
  }
  ref /= double(a.data.size());
  CHECK(mse(a, b) == doctest::Approx(ref).epsilon(1e-10));
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / ref)).epsilon(1e-10));
}

TEST_CASE("psnr/mse identity holds for every reported pair") {
  for (uint64_t s = 0; s < 10; ++s) {
    Image a = random_image(3, 12, 14, 100 + s);
    Image b = random_image(3, 12, 14, 200 + s);
    const double m = mse(a, b);
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / m)).epsilon(1e-12));
  }
}

TEST_CASE("ssim: identity, non-identity, symmetry, sliding-window oracle") {
  Image a = random_image(3, 20, 24, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

  Image neg = a;
  for (auto& v : neg.data) v = 1.f - v;
  CHECK(ssim(a, neg) < 1.0);

  Image b = random_image(3, 20, 24, 4);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));

  CHECK_THROWS_AS((void)ssim(random_image(1, 8, 8, 5), random_image(1, 8, 8, 6)),
                  ContractError);

  // Direct reference implementation on grayscale.
  auto gray_at = [](const Image& img, int y, int x) {
    double g = 0;
    for (int c = 0; c < img.channels; ++c) g += img.at(c, y, x);
    return g / img.channels;
  };
  const int H = 20, W = 24, win = 11;
  double kernel[11][11], ksum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double dy = i - 5, dx = j - 5;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  for (auto& row : kernel)
    for (auto& k : row) k /= ksum;
  double total = 0;
  int count = 0;
  for (int y = 0; y + win <= H; ++y)
    for (int x = 0; x + win <= W; ++x) {
      double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          ma += kernel[i][j] * gray_at(a, y + i, x + j);
          mb += kernel[i][j] * gray_at(b, y + i, x + j);
        }
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = gray_at(a, y + i, x + j) - ma;
          const double db = gray_at(b, y + i, x + j) - mb;
          va += kernel[i][j] * da * da;
          vb += kernel[i][j] * db * db;
          cov += kernel[i][j] * da * db;
        }
      const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  CHECK(ssim(a, b) == doctest::Approx(total / count).epsilon(1e-6));
}

TEST_CASE("metric report aggregates means") {
  MetricReport rep;
  rep.frames.push_back({"s", 0, 0, 20.0, 0.9, 0.01});
  rep.frames.push_back({"s", 1, 0, 30.0, 0.7, 0.001});
  rep.aggregate();
  CHECK(rep.mean_psnr == doctest::Approx(25.0));
  CHECK(rep.mean_ssim == doctest::Approx(0.8));
  const std::string csv = rep.to_csv();
  CHECK(csv.find("subject,frame,view,psnr,ssim,mse") == 0);
}
