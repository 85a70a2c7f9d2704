// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rerender/image.hpp"

namespace rerender {

// PSNR is capped at this value when MSE is 0.
inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
// 10*log10(1/MSE) on unit dynamic range; identical images report the cap.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse_value);

// Mean local SSIM: channel-mean grayscale, 11x11 Gaussian window sigma 1.5,
// C1 = 0.01^2, C2 = 0.03^2, valid (no-padding) windows.
double ssim(const Image& a, const Image& b);

struct FrameMetrics {
  std::string subject;
  int frame = 0, view = 0;
  double psnr = 0, ssim = 0, mse = 0;
};

struct MetricReport {
  std::vector<FrameMetrics> frames;
  double mean_psnr = 0, mean_ssim = 0, mean_mse = 0;

  void aggregate();
  std::string to_csv() const;
  std::string to_json() const;
};

}  // namespace rerender
