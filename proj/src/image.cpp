#include "tfg/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace tfg {

bool Image::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Image make_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3)
    throw std::invalid_argument("make_grayscale: expected 1 or 3 channels");
  Image out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                     0.114 * img.at(y, x, 2);
  return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("mean_abs_diff: shape mismatch");
  if (a.data.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / static_cast<double>(a.data.size());
}

Image box_blur(const Image& img, int radius) {
  if (radius <= 0) return img;
  const int h = img.height, w = img.width, c = img.channels;
  auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
  Image tmp(h, w, c), out(h, w, c);
  const double inv = 1.0 / (2 * radius + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d)
          s += img.at(y, clampi(x + d, 0, w - 1), k);
        tmp.at(y, x, k) = s * inv;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d)
          s += tmp.at(clampi(y + d, 0, h - 1), x, k);
        out.at(y, x, k) = s * inv;
      }
  return out;
}

namespace {

uint8_t to_byte(double v) {
  double s = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(s);
}

}  // namespace

void save_image(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("save_image: expected 1 or 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_image: cannot open " + path);
  f << (img.channels == 1 ? "P5" : "P6") << "\n"
    << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) bytes[i] = to_byte(img.data[i]);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("save_image: write failed for " + path);
}

Image load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_image: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("load_image: unsupported format in " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("load_image: bad header in " + path);
  f.get();  // single whitespace after header
  const int c = magic == "P5" ? 1 : 3;
  Image img(h, w, c);
  std::vector<uint8_t> bytes(img.data.size());
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("load_image: truncated file " + path);
  for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

}  // namespace tfg
