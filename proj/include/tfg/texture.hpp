#pragma once

#include <random>
#include <string>
#include <vector>

#include "tfg/image.hpp"
#include "tfg/landmarks.hpp"
#include "tfg/nn/layers.hpp"
#include "tfg/nn/optim.hpp"

namespace tfg {

// Per-pixel convex combination: out = (1 - att) * color + att * identity.
// att is single-channel in [0,1]; color and identity share shape.
Image compose(const Image& att, const Image& color, const Image& identity);

// Fixed per-pixel loss weights: `emphasis` inside the dilated convex hulls of
// the mouth (48-67) and eye (36-47) landmarks, `base` elsewhere.
Image build_spatial_mask(const LandmarkSet& lm, int height, int width,
                         double base = 1.0, double emphasis = 5.0,
                         double dilation_radius = 5.0);

// Masked L1, averaged over all elements (per-pixel mean convention).
double pixel_loss(const Image& pred, const Image& truth, const Image& mask);

// Least-squares GAN losses over patch score grids.
double lsgan_d_loss(const nn::Tensor& real_scores, const nn::Tensor& fake_scores);
double lsgan_g_loss(const nn::Tensor& fake_scores);

// Sum over frames of the unsquared L2 norms of (1 - att_t).
double attention_reg(const std::vector<Image>& att_seq);
// Sum over consecutive frames of first-order difference norms of att and color.
double temporal_reg(const std::vector<Image>& att_seq,
                    const std::vector<Image>& color_seq);

double generator_objective(double pix, double adv, double reg,
                           double lambda_pix = 100.0, double lambda_adv = 0.5,
                           double lambda_reg = 0.2);

struct TextureGeneratorConfig {
  int resolution = 128;     // divisible by 4
  long base_channels = 64;  // width of the first downsampling block
  long lm_channels = 8;     // landmark encoder feature width
  long residual_blocks = 3;
  double leaky_slope = 0.2;
  unsigned long long seed = 1;
};

struct TextureGeneratorOutput {
  nn::Var att;       // [B,1,H,W]
  nn::Var color;     // [B,3,H,W]
  nn::Var composed;  // [B,3,H,W]
};

// Landmark-conditioned attention/color generator. Both landmark images pass
// through a shared encoder; the feature difference is concatenated with the
// identity image and decoded into the two output heads. Compositing itself is
// fixed arithmetic, never learned.
class TextureGenerator {
 public:
  explicit TextureGenerator(const TextureGeneratorConfig& config);

  TextureGeneratorOutput forward_var(const nn::Var& identity, const nn::Var& lm_cur,
                                     const nn::Var& lm_id) const;

  struct FrameResult {
    Image att;
    Image color;
    Image composed;
  };
  FrameResult generate_frame(const Image& identity, const Image& lm_current,
                             const Image& lm_identity) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const TextureGeneratorConfig& config() const { return config_; }

 private:
  TextureGeneratorConfig config_;
  nn::ParamStore params_;
  nn::Conv2dLayer lm_enc1_, lm_enc2_;
  nn::Conv2dLayer down1_, down2_;
  nn::InstanceNorm2dLayer down1_norm_, down2_norm_;
  struct ResBlock {
    nn::Conv2dLayer conv1, conv2;
    nn::InstanceNorm2dLayer norm1, norm2;
  };
  std::vector<ResBlock> blocks_;
  nn::Conv2dLayer up1_, up2_;
  nn::InstanceNorm2dLayer up1_norm_, up2_norm_;
  nn::Conv2dLayer att_head_, color_head_;

  nn::Var encode_landmarks(const nn::Var& lm) const;

  friend struct TextureCheckpointAccess;
};

struct PatchDiscriminatorConfig {
  long base_channels = 64;
  int strided_layers = 3;  // each halves the resolution
  double leaky_slope = 0.2;
  unsigned long long seed = 2;
};

// PatchGAN-style score grid with instance normalization.
class PatchDiscriminator {
 public:
  explicit PatchDiscriminator(const PatchDiscriminatorConfig& config);

  nn::Var forward_var(const nn::Var& image) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const PatchDiscriminatorConfig& config() const { return config_; }

 private:
  PatchDiscriminatorConfig config_;
  nn::ParamStore params_;
  std::vector<nn::Conv2dLayer> convs_;
  std::vector<nn::InstanceNorm2dLayer> norms_;  // none for the first conv
  nn::Conv2dLayer score_;

  friend struct TextureCheckpointAccess;
};

// One training sample: an identity frame plus two consecutive target frames
// of the same clip, with landmark rasters and precomputed spatial masks.
struct TexturePairSample {
  Image identity_image;
  Image identity_landmarks;
  Image target_a, target_b;
  Image landmarks_a, landmarks_b;
  Image mask_a, mask_b;
};

struct TextureTrainConfig {
  long steps = 2000;
  long batch_pairs = 8;  // 16 frames per step
  double lambda_pix = 100.0;
  double lambda_adv = 0.5;
  double lambda_reg = 0.2;
  nn::AdamOptions adam{1e-4, 0.5, 0.999, 1e-8};
  unsigned long long seed = 1;
};

struct TextureTrainHistory {
  std::vector<double> g_total;
  std::vector<double> pix;
  std::vector<double> adv;
  std::vector<double> reg;
  std::vector<double> d_loss;
  std::vector<double> mean_attention;
};

TextureTrainHistory train_texture(TextureGenerator& gen, PatchDiscriminator& disc,
                                  const std::vector<TexturePairSample>& dataset,
                                  const TextureTrainConfig& config);

void save_texture_checkpoint(const TextureGenerator& gen,
                             const PatchDiscriminator& disc,
                             const std::string& path);
std::pair<TextureGenerator, PatchDiscriminator> load_texture_checkpoint(
    const std::string& path);

// CHW packing helpers shared with the pipeline.
nn::Tensor pack_images(const std::vector<const Image*>& images);
Image unpack_image(const nn::Tensor& batch, long index);

}  // namespace tfg
