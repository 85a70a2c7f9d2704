// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace rerender {

double mse(const Image& a, const Image& b) {
  RR_CHECK(a.channels == b.channels && a.height == b.height && a.width == b.width,
           "mse shape mismatch");
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse_value));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

namespace {

std::vector<double> to_gray(const Image& img) {
  std::vector<double> g(img.plane());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0;
      for (int c = 0; c < img.channels; ++c) acc += img.at(c, y, x);
      g[static_cast<size_t>(y) * img.width + x] = acc / img.channels;
    }
  return g;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  RR_CHECK(a.channels == b.channels && a.height == b.height && a.width == b.width,
           "ssim shape mismatch");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  RR_CHECK(a.height >= kWindow && a.width >= kWindow,
           "image smaller than the ssim window");

  const std::vector<double> ga = to_gray(a), gb = to_gray(b);
  const int H = a.height, W = a.width;

  double kernel[kWindow][kWindow];
  double ksum = 0;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) {
      const double dy = i - kWindow / 2, dx = j - kWindow / 2;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
      ksum += kernel[i][j];
    }
  for (auto& row : kernel)
    for (auto& k : row) k /= ksum;

  double total = 0;
  int count = 0;
  for (int y = 0; y + kWindow <= H; ++y) {
    for (int x = 0; x + kWindow <= W; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
          ma += kernel[i][j] * ga[static_cast<size_t>(y + i) * W + x + j];
          mb += kernel[i][j] * gb[static_cast<size_t>(y + i) * W + x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
          const double da = ga[static_cast<size_t>(y + i) * W + x + j] - ma;
          const double db = gb[static_cast<size_t>(y + i) * W + x + j] - mb;
          va += kernel[i][j] * da * da;
          vb += kernel[i][j] * db * db;
          cov += kernel[i][j] * da * db;
        }
      const double num = (2 * ma * mb + kC1) * (2 * cov + kC2);
      const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / count;
}

void MetricReport::aggregate() {
  mean_psnr = mean_ssim = mean_mse = 0;
  if (frames.empty()) return;
  for (const auto& f : frames) {
    mean_psnr += f.psnr;
    mean_ssim += f.ssim;
    mean_mse += f.mse;
  }
  mean_psnr /= static_cast<double>(frames.size());
  mean_ssim /= static_cast<double>(frames.size());
  mean_mse /= static_cast<double>(frames.size());
}

std::string MetricReport::to_csv() const {
  std::string out = "subject,frame,view,psnr,ssim,mse\n";
  char buf[160];
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.9g,%.9g,%.9g\n", f.subject.c_str(), f.frame,
                  f.view, f.psnr, f.ssim, f.mse);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "mean,,,%.9g,%.9g,%.9g\n", mean_psnr, mean_ssim, mean_mse);
  out += buf;
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  j["mean_mse"] = mean_mse;
  j["frame_count"] = frames.size();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames)
    arr.push_back(nlohmann::json{{"subject", f.subject},
                                 {"frame", f.frame},
                                 {"view", f.view},
                                 {"psnr", f.psnr},
                                 {"ssim", f.ssim},
                                 {"mse", f.mse}});
  j["frames"] = arr;
  return j.dump(2);
}

}  // namespace rerender
