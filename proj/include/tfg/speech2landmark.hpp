#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "tfg/audio.hpp"
#include "tfg/landmarks.hpp"
#include "tfg/nn/layers.hpp"
#include "tfg/nn/optim.hpp"
#include "tfg/pca.hpp"

namespace tfg {

inline constexpr long kDisplacementDim = kNumLandmarks * 2;  // 136

// Fits a PCA basis over flattened canonical displacements (x0,y0,x1,y1,...).
PcaBasis pca_fit(const std::vector<CanonicalDisplacement>& displacements,
                 double variance_target);

struct Speech2LandmarkConfig {
  // Four stride-2 convolutions collapse the 16x29 window to a flat code of
  // width 2*conv_channels[3]; two linear layers decode through PCA space.
  std::array<long, 4> conv_channels{32, 64, 128, 128};
  double leaky_slope = 0.2;
  unsigned long long seed = 1;

  long code_dim() const { return 2 * conv_channels[3]; }
};

// Encoder-decoder regressor from one audio window to one canonical
// displacement. The final linear layer starts at the PCA reconstruction:
// weight = components^T, bias = PCA mean.
class Speech2LandmarkModel {
 public:
  Speech2LandmarkModel(const PcaBasis& basis, const Speech2LandmarkConfig& config);

  // Batched graph forward; input [B,1,16,29] -> [B,136].
  nn::Var forward_var(const nn::Var& input) const;

  // Eval-mode single-window forward.
  CanonicalDisplacement forward(const AudioFeatureWindow& window) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const PcaBasis& basis() const { return basis_; }
  const Speech2LandmarkConfig& config() const { return config_; }

  nn::LinearLayer& final_layer() { return fc_out_; }

  void save(const std::string& path) const;
  static Speech2LandmarkModel load(const std::string& path);

 private:
  Speech2LandmarkConfig config_;
  PcaBasis basis_;
  nn::ParamStore params_;
  std::array<nn::Conv2dLayer, 4> convs_;
  nn::LinearLayer fc_code_;  // code -> K
  nn::LinearLayer fc_out_;   // K -> 136, PCA-initialized
};

// Squared L2 between displacements (sum over all 136 coordinates).
double loss_lmark(const CanonicalDisplacement& pred,
                  const CanonicalDisplacement& truth);

// Squared L2 between predicted and true frame-to-frame displacement deltas.
double loss_temp(const CanonicalDisplacement& pred_t,
                 const CanonicalDisplacement& pred_t1,
                 const CanonicalDisplacement& truth_t,
                 const CanonicalDisplacement& truth_t1);

double loss_total(double lmark, double temp, double lambda_lmark,
                  double lambda_temp);

// One clip of aligned windows and ground-truth displacements.
struct LandmarkClip {
  std::vector<AudioFeatureWindow> windows;
  std::vector<CanonicalDisplacement> targets;
};

struct LandmarkTrainConfig {
  long steps = 2000;
  long batch = 16;
  double lambda_lmark = 1.0;
  double lambda_temp = 0.5;
  nn::AdamOptions adam{};  // lr 1e-4, beta1 0.5, beta2 0.999
  unsigned long long seed = 1;
};

struct TrainHistory {
  std::vector<double> total;
  std::vector<double> lmark;
  std::vector<double> temp;
};

// Supervised training over adjacent frame pairs; Eq. 3 couples each sampled
// pair, Eq. 2 supervises both frames.
TrainHistory train_speech2landmark(Speech2LandmarkModel& model,
                                   const std::vector<LandmarkClip>& dataset,
                                   const LandmarkTrainConfig& config);

// Batch helper: packs windows into a [B,1,16,29] tensor.
nn::Tensor pack_windows(const std::vector<AudioFeatureWindow>& windows);

CanonicalDisplacement unpack_displacement(const nn::Tensor& row_major_136,
                                          long row);

}  // namespace tfg
