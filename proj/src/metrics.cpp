#include "tfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tfg {

double psnr(const Image& pred, const Image& truth) {
  if (!pred.same_shape(truth))
    throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - truth.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size) * size);
  const int half = size / 2;
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dy = y - half, dx = x - half;
      w[static_cast<size_t>(y) * size + x] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      sum += w[static_cast<size_t>(y) * size + x];
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim(const Image& pred, const Image& truth) {
  if (!pred.same_shape(truth))
    throw std::invalid_argument("ssim: shape mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (k1*L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  if (pred.height < kWin || pred.width < kWin)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  static const std::vector<double> win = gaussian_window(kWin, kSigma);

  double total = 0.0;
  long count = 0;
  for (int c = 0; c < pred.channels; ++c)
    for (int y = 0; y + kWin <= pred.height; ++y)
      for (int x = 0; x + kWin <= pred.width; ++x) {
        double mx = 0.0, my = 0.0;
        for (int wy = 0; wy < kWin; ++wy)
          for (int wx = 0; wx < kWin; ++wx) {
            const double w = win[static_cast<size_t>(wy) * kWin + wx];
            mx += w * pred.at(y + wy, x + wx, c);
            my += w * truth.at(y + wy, x + wx, c);
          }
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (int wy = 0; wy < kWin; ++wy)
          for (int wx = 0; wx < kWin; ++wx) {
            const double w = win[static_cast<size_t>(wy) * kWin + wx];
            const double dx = pred.at(y + wy, x + wx, c) - mx;
            const double dy = truth.at(y + wy, x + wx, c) - my;
            vx += w * dx * dx;
            vy += w * dy * dy;
            cov += w * dx * dy;
          }
        total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        ++count;
      }
  return total / static_cast<double>(count);
}

namespace {

// Constants from the original CPBD formulation: beta of the psychometric
// function, JNB widths by block contrast, and the block-processing threshold.
constexpr double kBeta = 3.6;
constexpr int kBlock = 64;
constexpr double kEdgeBlockFraction = 0.002;

double jnb_width(double block_contrast) { return block_contrast <= 50.0 ? 5.0 : 3.0; }

// Marziliano-style width of a vertical edge: distance between the horizontal
// local extrema bracketing the edge pixel.
int edge_width(const std::vector<double>& row, int x, bool rising) {
  const int w = static_cast<int>(row.size());
  int left = x;
  if (rising) {
    while (left > 0 && row[static_cast<size_t>(left - 1)] < row[static_cast<size_t>(left)]) --left;
  } else {
    while (left > 0 && row[static_cast<size_t>(left - 1)] > row[static_cast<size_t>(left)]) --left;
  }
  int right = x;
  if (rising) {
    while (right + 1 < w && row[static_cast<size_t>(right + 1)] > row[static_cast<size_t>(right)]) ++right;
  } else {
    while (right + 1 < w && row[static_cast<size_t>(right + 1)] < row[static_cast<size_t>(right)]) ++right;
  }
  return right - left;
}

}  // namespace

double cpbd(const Image& image) {
  const Image gray = make_grayscale(image);
  const int h = gray.height, w = gray.width;
  if (h < 3 || w < 3) return 0.0;

  // 0-255 scale, Sobel horizontal gradient (vertical edges).
  std::vector<std::vector<double>> lum(static_cast<size_t>(h),
                                       std::vector<double>(static_cast<size_t>(w)));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum[static_cast<size_t>(y)][static_cast<size_t>(x)] = gray.at(y, x) * 255.0;

  std::vector<std::vector<double>> gx(static_cast<size_t>(h),
                                      std::vector<double>(static_cast<size_t>(w), 0.0));
  double mean_g2 = 0.0;
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const double v = (lum[y - 1][x + 1] + 2.0 * lum[y][x + 1] + lum[y + 1][x + 1] -
                        lum[y - 1][x - 1] - 2.0 * lum[y][x - 1] - lum[y + 1][x - 1]) /
                       8.0;
      gx[static_cast<size_t>(y)][static_cast<size_t>(x)] = v;
      mean_g2 += v * v;
    }
  mean_g2 /= static_cast<double>((h - 2) * (w - 2));
  const double threshold2 = 4.0 * mean_g2;
  if (threshold2 <= 0.0) return 0.0;  // flat image, no edges

  // Edge map: above threshold and a horizontal local maximum of |gx|.
  std::vector<std::vector<bool>> edge(static_cast<size_t>(h),
                                      std::vector<bool>(static_cast<size_t>(w), false));
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const double g2 = gx[y][x] * gx[y][x];
      if (g2 > threshold2 && std::abs(gx[y][x]) >= std::abs(gx[y][x - 1]) &&
          std::abs(gx[y][x]) >= std::abs(gx[y][x + 1]))
        edge[static_cast<size_t>(y)][static_cast<size_t>(x)] = true;
    }

  long sharp_edges = 0, total_edges = 0;
  for (int by = 0; by < h; by += kBlock)
    for (int bx = 0; bx < w; bx += kBlock) {
      const int y1 = std::min(by + kBlock, h), x1 = std::min(bx + kBlock, w);
      long block_edges = 0;
      double lo = 255.0, hi = 0.0;
      for (int y = by; y < y1; ++y)
        for (int x = bx; x < x1; ++x) {
          if (edge[y][x]) ++block_edges;
          lo = std::min(lo, lum[y][x]);
          hi = std::max(hi, lum[y][x]);
        }
      const long block_pixels = static_cast<long>(y1 - by) * (x1 - bx);
      if (block_edges <=
          static_cast<long>(kEdgeBlockFraction * static_cast<double>(block_pixels)))
        continue;  // smooth block
      const double wjnb = jnb_width(hi - lo);
      for (int y = by; y < y1; ++y)
        for (int x = bx; x < x1; ++x) {
          if (!edge[y][x]) continue;
          const int width = edge_width(lum[static_cast<size_t>(y)], x, gx[y][x] > 0);
          if (width <= 0) continue;
          ++total_edges;
          // P_blur <= 1 - 1/e exactly when width <= JNB width.
          const double p_blur =
              1.0 - std::exp(-std::pow(static_cast<double>(width) / wjnb, kBeta));
          if (p_blur <= 1.0 - std::exp(-1.0)) ++sharp_edges;
        }
    }
  if (total_edges == 0) return 0.0;
  return static_cast<double>(sharp_edges) / static_cast<double>(total_edges);
}

double lmd(const std::vector<LandmarkSet>& pred,
           const std::vector<LandmarkSet>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("lmd: frame count mismatch");
  if (pred.empty()) throw std::invalid_argument("lmd: empty streams");
  double total = 0.0;
  long count = 0;
  for (size_t t = 0; t < pred.size(); ++t) {
    const Eigen::Vector2d anchor_p = pred[t].point(lm_group::kNoseTip);
    const Eigen::Vector2d anchor_q = truth[t].point(lm_group::kNoseTip);
    for (int i = lm_group::kMouthBegin; i < lm_group::kMouthEnd; ++i) {
      total += ((pred[t].point(i) - anchor_p) - (truth[t].point(i) - anchor_q)).norm();
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

BlinkComparison compare_blink_stats(const BlinkStats& real,
                                    const BlinkStats& generated) {
  BlinkComparison cmp;
  cmp.real = real;
  cmp.generated = generated;
  cmp.rate_difference = generated.blink_rate - real.blink_rate;
  cmp.duration_difference =
      generated.mean_blink_duration - real.mean_blink_duration;
  cmp.inter_blink_difference =
      generated.mean_inter_blink - real.mean_inter_blink;
  cmp.generated_in_human_range =
      generated.blink_rate >= 0.28 && generated.blink_rate <= 0.4;
  for (int i = 0; i <= 10; ++i) cmp.histogram_edges.push_back(0.1 * i);
  cmp.real_histogram.assign(10, 0);
  cmp.generated_histogram.assign(10, 0);
  auto fill = [](std::vector<long>& hist, const std::vector<double>& durations) {
    for (double d : durations) {
      const int bin = std::min(9, std::max(0, static_cast<int>(d / 0.1)));
      ++hist[static_cast<size_t>(bin)];
    }
  };
  fill(cmp.real_histogram, real.durations);
  fill(cmp.generated_histogram, generated.durations);
  return cmp;
}

std::string format_blink_comparison(const BlinkComparison& cmp) {
  std::ostringstream out;
  out.precision(4);
  out << "blink statistics           real      generated  difference\n";
  out << "rate (blinks/s)            " << cmp.real.blink_rate << "    "
      << cmp.generated.blink_rate << "    " << cmp.rate_difference << "\n";
  out << "mean duration (s)          " << cmp.real.mean_blink_duration << "    "
      << cmp.generated.mean_blink_duration << "    " << cmp.duration_difference
      << "\n";
  out << "mean inter-blink (s)       " << cmp.real.mean_inter_blink << "    "
      << cmp.generated.mean_inter_blink << "    " << cmp.inter_blink_difference
      << "\n";
  out << "generated rate in human range 0.28-0.4 blinks/s: "
      << (cmp.generated_in_human_range ? "yes" : "no") << "\n";
  out << "duration histogram (0.1 s bins, real | generated):\n";
  for (size_t i = 0; i < cmp.real_histogram.size(); ++i)
    out << "  [" << cmp.histogram_edges[i] << "," << cmp.histogram_edges[i + 1]
        << ")  " << cmp.real_histogram[i] << " | " << cmp.generated_histogram[i]
        << "\n";
  return out.str();
}

}  // namespace tfg
