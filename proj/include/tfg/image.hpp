#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tfg {

// Dense row-major image, interleaved channels, values conventionally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  size_t size() const { return data.size(); }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }
  bool all_finite() const;
};

Image make_grayscale(const Image& img);

// Mean absolute difference over all elements. Shapes must match.
double mean_abs_diff(const Image& a, const Image& b);

// Separable box blur with the given radius (window 2r+1), replicate borders.
Image box_blur(const Image& img, int radius);

// PGM (P5) for 1-channel, PPM (P6) for 3-channel, 8-bit. Deterministic.
void save_image(const Image& img, const std::string& path);
Image load_image(const std::string& path);

}  // namespace tfg
