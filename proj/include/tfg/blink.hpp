#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "tfg/landmarks.hpp"
#include "tfg/nn/layers.hpp"
#include "tfg/nn/optim.hpp"
#include "tfg/pca.hpp"

namespace tfg {

inline constexpr int kEyeDisplacementDim = kEyeRegionSize * 2;  // 44

// T x 44 displacement sequence for the 22 eye-region landmarks. Column order
// follows eye_region_indices(): (x, y) per landmark.
struct BlinkSequence {
  Eigen::MatrixXd deltas;  // T x 44

  long length() const { return deltas.rows(); }
  void validate(const char* where) const;
};

struct BlinkStats {
  double blink_rate = 0.0;          // blinks / second
  double mean_blink_duration = 0.0; // seconds
  double mean_inter_blink = 0.0;    // seconds, gap between consecutive blinks
  long blink_count = 0;
  std::vector<double> durations;    // seconds, one per detected blink
};

// Biased squared-MMD estimator with kernel k(x,y) = exp(-|x-y|^2 / (2*sigma)),
// each sample flattened to a T*44 vector. May be slightly negative from
// floating error; callers clamp at reporting time.
double mmd_loss(const std::vector<BlinkSequence>& real,
                const std::vector<BlinkSequence>& fake, double sigma);

// Sum of squared violations outside [lo, hi] per column.
double range_regularizer(const BlinkSequence& fake, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi);

struct BlinkGeneratorConfig {
  long noise_dim = 10;
  long hidden = 64;
  unsigned long long seed = 1;
};

// Recurrent noise-to-displacement generator; the output layer starts as the
// PCA reconstruction over eye-displacement space.
class BlinkGenerator {
 public:
  BlinkGenerator(const PcaBasis& basis, const BlinkGeneratorConfig& config);

  // Graph forward for a noise tensor [B, T, noise_dim]; returns per-step
  // outputs, each [B, 44].
  std::vector<nn::Var> forward_var(const nn::Tensor& noise) const;

  BlinkSequence generate(long frames, unsigned long long seed) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const BlinkGeneratorConfig& config() const { return config_; }
  const PcaBasis& basis() const { return basis_; }

  void save(const std::string& path) const;
  static BlinkGenerator load(const std::string& path);

 private:
  BlinkGeneratorConfig config_;
  PcaBasis basis_;
  nn::ParamStore params_;
  nn::GruLayer gru_;
  nn::LinearLayer fc_code_;  // hidden -> K
  nn::LinearLayer fc_out_;   // K -> 44, PCA-initialized
};

struct BlinkTrainConfig {
  long steps = 1500;
  long batch = 16;
  long sequence_length = 75;  // ~3 s at 25 fps
  double range_weight = 1.0;
  nn::AdamOptions adam{1e-3, 0.5, 0.999, 1e-8};
  unsigned long long seed = 1;
};

struct BlinkTrainResult {
  std::vector<double> loss_history;
  Eigen::VectorXd lo;  // per-column training range
  Eigen::VectorXd hi;
};

// Unsupervised MMD training against real eye-displacement sequences. Sigma
// follows the median pairwise squared distance of each real batch.
BlinkTrainResult train_blink(BlinkGenerator& gen,
                             const std::vector<BlinkSequence>& real_sequences,
                             const BlinkTrainConfig& config);

// Adds blink displacements to the eye-region indices; other points unchanged.
std::vector<LandmarkSet> impose_blinks(const std::vector<LandmarkSet>& landmarks,
                                       const BlinkSequence& blinks);

// Eye aspect ratio of one frame (mean of both eyes).
double eye_aspect_ratio(const LandmarkSet& lm);

struct BlinkDetectorConfig {
  double close_threshold = 0.2;
  double reopen_threshold = 0.22;  // hysteresis
  int min_frames = 2;
};

BlinkStats detect_blinks(const std::vector<LandmarkSet>& frames, double fps,
                         const BlinkDetectorConfig& config = {});

// Convenience: imposes a blink sequence on a fixed base face, then detects.
BlinkStats detect_blinks_on_base(const BlinkSequence& blinks,
                                 const LandmarkSet& base, double fps,
                                 const BlinkDetectorConfig& config = {});

}  // namespace tfg
