// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace rerender {

Tensor image_to_tensor(const Image& img, bool requires_grad) {
  Tensor t = Tensor::from_data({1, img.channels, img.height, img.width}, {img.data.begin(), img.data.end()});
  t.set_requires_grad(requires_grad);
  return t;
}

Image tensor_to_image(const Tensor& t, int sample) {
  const Shape s = t.shape();
  RR_CHECK(sample >= 0 && sample < s.n, "sample index out of range");
  Image img(s.c, s.h, s.w);
  const size_t plane = static_cast<size_t>(s.c) * s.h * s.w;
  std::copy(t.vec().begin() + static_cast<long>(plane) * sample,
            t.vec().begin() + static_cast<long>(plane) * (sample + 1), img.data.begin());
  return img;
}

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32be(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& payload) {
  put_u32be(out, static_cast<uint32_t>(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32be(out, crc);
}

uint8_t float_to_byte(float v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  RR_CHECK(img.channels == 1 || img.channels == 3,
           "write_png supports 1 or 3 channels, got " << img.channels);
  RR_CHECK(img.height > 0 && img.width > 0, "write_png empty image");

  const int bpp = img.channels;
  const size_t stride = static_cast<size_t>(img.width) * bpp;
  std::vector<uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = raw.data() + y * (stride + 1);
    row[0] = 0;  // filter: none
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < bpp; ++c)
        row[1 + x * bpp + c] = float_to_byte(img.at(c, y, x));
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  const int rc = compress2(compressed.data(), &bound, raw.data(),
                           static_cast<uLong>(raw.size()), 6);
  RR_RUNTIME_CHECK(rc == Z_OK, "png deflate failed for " << path);
  compressed.resize(bound);

  std::vector<uint8_t> file;
  static const uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  file.insert(file.end(), kSig, kSig + 8);

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(img.width));
  put_u32be(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);           // gray / rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(file, "IHDR", ihdr);
  write_chunk(file, "IDAT", compressed);
  write_chunk(file, "IEND", {});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  RR_RUNTIME_CHECK(os.good(), "cannot open for writing: " << path);
  os.write(reinterpret_cast<const char*>(file.data()), static_cast<long>(file.size()));
  RR_RUNTIME_CHECK(os.good(), "write failed: " << path);
}

Image read_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  RR_RUNTIME_CHECK(is.good(), "cannot open: " << path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
  RR_RUNTIME_CHECK(file.size() > 8 && file[0] == 137 && file[1] == 'P' && file[2] == 'N' &&
                       file[3] == 'G',
                   "not a png file: " << path);

  size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  std::vector<uint8_t> idat;
  while (pos + 8 <= file.size()) {
    const uint32_t len = get_u32be(file.data() + pos);
    RR_RUNTIME_CHECK(pos + 12 + len <= file.size(), "truncated png: " << path);
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const uint8_t* payload = file.data() + pos + 8;
    if (!std::memcmp(type, "IHDR", 4)) {
      width = static_cast<int>(get_u32be(payload));
      height = static_cast<int>(get_u32be(payload + 4));
      const int depth = payload[8], color = payload[9];
      RR_RUNTIME_CHECK(depth == 8, "unsupported png bit depth " << depth << ": " << path);
      if (color == 0) channels = 1;
      else if (color == 2) channels = 3;
      else if (color == 6) channels = 4;
      else RR_RUNTIME_CHECK(false, "unsupported png color type " << color << ": " << path);
      RR_RUNTIME_CHECK(payload[12] == 0, "interlaced png unsupported: " << path);
    } else if (!std::memcmp(type, "IDAT", 4)) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (!std::memcmp(type, "IEND", 4)) {
      break;
    }
    pos += 12 + len;
  }
  RR_RUNTIME_CHECK(width > 0 && height > 0 && !idat.empty(), "png missing data: " << path);

  const size_t stride = static_cast<size_t>(width) * channels;
  std::vector<uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  RR_RUNTIME_CHECK(rc == Z_OK && raw_len == raw.size(), "png inflate failed: " << path);

  // Undo per-row filters in place.
  const int bpp = channels;
  std::vector<uint8_t> prev(stride, 0);
  Image img(channels, height, width);
  for (int y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + y * (stride + 1);
    const uint8_t filter = row[0];
    uint8_t* cur = row + 1;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
      int v = cur[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: RR_RUNTIME_CHECK(false, "unsupported png filter " << int(filter));
      }
      cur[i] = static_cast<uint8_t>(v & 0xff);
    }
    std::memcpy(prev.data(), cur, stride);
    for (int x = 0; x < width; ++x)
      for (int ch = 0; ch < channels; ++ch)
        img.at(ch, y, x) = static_cast<float>(cur[x * bpp + ch]) / 255.f;
  }
  return img;
}

Image hconcat(const std::vector<Image>& parts) {
  RR_CHECK(!parts.empty(), "hconcat needs at least one image");
  int total_w = 0;
  for (const auto& p : parts) {
    RR_CHECK(p.height == parts[0].height && p.channels == parts[0].channels,
             "hconcat parts must share height and channels");
    total_w += p.width;
  }
  Image out(parts[0].channels, parts[0].height, total_w);
  int x0 = 0;
  for (const auto& p : parts) {
    for (int c = 0; c < p.channels; ++c)
      for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) out.at(c, y, x0 + x) = p.at(c, y, x);
    x0 += p.width;
  }
  return out;
}

Image crop(const Image& img, int x0, int width) {
  RR_CHECK(x0 >= 0 && width >= 1 && x0 + width <= img.width, "crop out of range");
  Image out(img.channels, img.height, width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, y, x0 + x);
  return out;
}

}  // namespace rerender
