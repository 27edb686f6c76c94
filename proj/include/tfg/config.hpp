#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace tfg {

// Pipeline-wide hyperparameters. Defaults follow the published settings:
// lambda_lmark 1, lambda_temp 0.5, lambda_pix 100, lambda_adv 0.5,
// lambda_reg 0.2, Adam lr 1e-4 with beta1 0.5 / beta2 0.999, batch 16.
struct PipelineConfig {
  // Loss weights.
  double lambda_lmark = 1.0;
  double lambda_temp = 0.5;
  double lambda_pix = 100.0;
  double lambda_adv = 0.5;
  double lambda_reg = 0.2;
  // Optimizer.
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  long batch = 16;
  // Blink generator.
  long blink_sequence_length = 75;  // ~3 s at 25 fps
  long blink_noise_dim = 10;
  long blink_hidden = 64;
  double blink_learning_rate = 1e-3;
  double blink_range_weight = 1.0;
  // Geometry / PCA.
  int resolution = 128;
  double pca_variance = 0.99;
  // Texture network widths.
  long texture_base_channels = 64;
  long texture_lm_channels = 8;
  long texture_residual_blocks = 3;
  long disc_base_channels = 64;
  int disc_strided_layers = 3;
  // Training lengths.
  long landmark_steps = 2000;
  long blink_steps = 1500;
  long texture_steps = 2000;
  unsigned long long seed = 1;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;

  // Content hash of the canonical JSON form, hex-encoded.
  std::string content_hash() const;
};

uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);
std::string file_hash_hex(const std::string& path);

}  // namespace tfg
