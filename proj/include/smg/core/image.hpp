#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "smg/core/errors.hpp"
#include "smg/core/tensor.hpp"

namespace smg {

// 8-bit RGB image, channel-planar layout (3 x H x W) to match tensors.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels; // 3*H*W, planes R,G,B

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, 0) {}

  std::uint8_t& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::uint8_t at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

inline std::uint8_t quantize_u8(double v) {
  double q = v * 255.0 + 0.5;
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return static_cast<std::uint8_t>(q);
}

// Binary PPM (P6). Lossless for 8-bit content, no dependencies.
inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) f.put(static_cast<char>(img.at(c, y, x)));
  if (!f) throw InputError("write failed: " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  f >> magic >> w >> h >> maxv;
  if (magic != "P6" || maxv != 255 || w <= 0 || h <= 0) throw IntegrityError("not an 8-bit P6 ppm: " + path);
  f.get(); // single whitespace after header
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        int v = f.get();
        if (v < 0) throw IntegrityError("truncated ppm: " + path);
        img.at(c, y, x) = static_cast<std::uint8_t>(v);
      }
  return img;
}

// Lay out images left-to-right with a 1px separator column.
inline Image hstack(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw InputError("hstack: no images");
  const int h = imgs[0].height;
  int w = -1;
  for (const auto& im : imgs) {
    if (im.height != h) throw InputError("hstack: heights differ");
    w += im.width + 1;
  }
  Image out(h, w);
  int x0 = 0;
  for (const auto& im : imgs) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < im.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(c, y, x0 + x) = im.at(c, y, x);
    x0 += im.width + 1;
  }
  return out;
}

// Take one RGB frame (3 channels starting at c0) of a [C,H,W] tensor in [0,1].
template <typename S>
inline Image frame_to_image(const Tensor<S>& t, int c0) {
  if (t.rank() != 3 || c0 + 3 > t.shape[0]) throw InputError("frame_to_image: bad channel range");
  Image img(t.shape[1], t.shape[2]);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < t.shape[1]; ++y)
      for (int x = 0; x < t.shape[2]; ++x)
        img.at(c, y, x) = quantize_u8(static_cast<double>(t.at3(c0 + c, y, x)));
  return img;
}

// Grayscale [H,W]-like plane rendered as RGB.
template <typename S>
inline Image plane_to_image(const Tensor<S>& t, int plane) {
  if (t.rank() != 3 || plane >= t.shape[0]) throw InputError("plane_to_image: bad plane");
  Image img(t.shape[1], t.shape[2]);
  for (int y = 0; y < t.shape[1]; ++y)
    for (int x = 0; x < t.shape[2]; ++x) {
      std::uint8_t v = quantize_u8(static_cast<double>(t.at3(plane, y, x)));
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
    }
  return img;
}

} // namespace smg
