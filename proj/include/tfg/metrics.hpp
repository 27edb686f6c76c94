#pragma once

#include <string>
#include <vector>

#include "tfg/blink.hpp"
#include "tfg/image.hpp"
#include "tfg/landmarks.hpp"

namespace tfg {

// 10*log10(1/MSE) over [0,1] images; +infinity for identical inputs.
double psnr(const Image& pred, const Image& truth);

// Windowed SSIM: 11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03,
// dynamic range 1.0; channels averaged.
double ssim(const Image& pred, const Image& truth);

// Cumulative probability of blur detection. Sharpness in [0,1]; flat images
// (no detected edges) return 0 by convention.
double cpbd(const Image& image);

// Mean Euclidean distance over mouth landmarks (48-67) after per-frame
// translation alignment on the nose tip (index 30).
double lmd(const std::vector<LandmarkSet>& pred,
           const std::vector<LandmarkSet>& truth);

struct EvalReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double cpbd_pred = 0.0;
  double cpbd_truth = 0.0;
  double lmd = 0.0;
  long frames = 0;
  std::string lmd_source;  // which landmark stream produced the LMD column
};

struct BlinkComparison {
  BlinkStats real;
  BlinkStats generated;
  double rate_difference = 0.0;
  double duration_difference = 0.0;
  double inter_blink_difference = 0.0;
  bool generated_in_human_range = false;  // 0.28-0.4 blinks/s
  std::vector<double> histogram_edges;    // duration histogram bins, seconds
  std::vector<long> real_histogram;
  std::vector<long> generated_histogram;
};

BlinkComparison compare_blink_stats(const BlinkStats& real,
                                    const BlinkStats& generated);

std::string format_blink_comparison(const BlinkComparison& cmp);

}  // namespace tfg
