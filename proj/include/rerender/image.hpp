// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rerender/tensor.hpp"

namespace rerender {

// Planar float image (channel-major, like a single tensor sample), values
// nominally in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.f)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t plane() const { return static_cast<size_t>(height) * width; }
};

// Image <-> single-sample tensor.
Tensor image_to_tensor(const Image& img, bool requires_grad = false);
Image tensor_to_image(const Tensor& t, int sample = 0);

// 8-bit PNG I/O (zlib-backed). Writes grayscale or RGB depending on the
// image's channel count; reading returns whatever channel count the file has
// (palette and 16-bit files are rejected). Deterministic byte output.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Horizontal concatenation; all images must share height and channels.
Image hconcat(const std::vector<Image>& parts);
Image crop(const Image& img, int x0, int width);

}  // namespace rerender
