#include "tfg/texture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tfg/nn/serialize.hpp"

namespace tfg {

using nn::Var;

Image compose(const Image& att, const Image& color, const Image& identity) {
  if (!color.same_shape(identity))
    throw std::invalid_argument("compose: color/identity shape mismatch");
  if (att.height != color.height || att.width != color.width || att.channels != 1)
    throw std::invalid_argument("compose: attention map shape mismatch");
  Image out(color.height, color.width, color.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const double a = att.at(y, x);
      for (int c = 0; c < out.channels; ++c)
        out.at(y, x, c) = (1.0 - a) * color.at(y, x, c) + a * identity.at(y, x, c);
    }
  return out;
}

Image build_spatial_mask(const LandmarkSet& lm, int height, int width, double base,
                         double emphasis, double dilation_radius) {
  lm.validate("build_spatial_mask");
  if (base <= 0 || emphasis <= 0)
    throw std::invalid_argument("build_spatial_mask: weights must be positive");
  std::vector<Eigen::Vector2d> mouth, eyes;
  for (int i = lm_group::kMouthBegin; i < lm_group::kMouthEnd; ++i)
    mouth.push_back(lm.point(i));
  for (int i = lm_group::kEyeBegin; i < lm_group::kEyeEnd; ++i)
    eyes.push_back(lm.point(i));
  const auto mouth_hull = convex_hull(mouth);
  const auto eye_hull = convex_hull(eyes);
  Image mask(height, width, 1, base);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d p(static_cast<double>(x), static_cast<double>(y));
      if (distance_to_convex_hull(p, mouth_hull) <= dilation_radius ||
          distance_to_convex_hull(p, eye_hull) <= dilation_radius)
        mask.at(y, x) = emphasis;
    }
  return mask;
}

// Plain weighted sum; the trainer divides by the element count so the
// published lambda weights keep their relative balance at any resolution.
double pixel_loss(const Image& pred, const Image& truth, const Image& mask) {
  if (!pred.same_shape(truth))
    throw std::invalid_argument("pixel_loss: pred/truth shape mismatch");
  if (mask.height != pred.height || mask.width != pred.width || mask.channels != 1)
    throw std::invalid_argument("pixel_loss: mask shape mismatch");
  double s = 0.0;
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x)
      for (int c = 0; c < pred.channels; ++c)
        s += mask.at(y, x) * std::abs(pred.at(y, x, c) - truth.at(y, x, c));
  return s;
}

double lsgan_d_loss(const nn::Tensor& real_scores, const nn::Tensor& fake_scores) {
  if (!real_scores.all_finite() || !fake_scores.all_finite())
    throw std::invalid_argument("lsgan_d_loss: non-finite scores");
  double real_term = 0.0, fake_term = 0.0;
  for (long i = 0; i < real_scores.numel(); ++i) {
    const double d = real_scores[i] - 1.0;
    real_term += d * d;
  }
  for (long i = 0; i < fake_scores.numel(); ++i)
    fake_term += fake_scores[i] * fake_scores[i];
  return 0.5 * real_term / static_cast<double>(real_scores.numel()) +
         0.5 * fake_term / static_cast<double>(fake_scores.numel());
}

double lsgan_g_loss(const nn::Tensor& fake_scores) {
  if (!fake_scores.all_finite())
    throw std::invalid_argument("lsgan_g_loss: non-finite scores");
  double s = 0.0;
  for (long i = 0; i < fake_scores.numel(); ++i) {
    const double d = fake_scores[i] - 1.0;
    s += d * d;
  }
  return 0.5 * s / static_cast<double>(fake_scores.numel());
}

namespace {

double frobenius(const Image& img, double offset_from = 0.0) {
  // offset_from == 0: plain norm; otherwise norm of (offset_from - img).
  double s = 0.0;
  for (double v : img.data) {
    const double d = offset_from == 0.0 ? v : offset_from - v;
    s += d * d;
  }
  return std::sqrt(s);
}

double diff_norm(const Image& a, const Image& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double attention_reg(const std::vector<Image>& att_seq) {
  if (att_seq.empty()) throw std::invalid_argument("attention_reg: empty sequence");
  double s = 0.0;
  for (const Image& att : att_seq) s += frobenius(att, 1.0);
  return s;
}

double temporal_reg(const std::vector<Image>& att_seq,
                    const std::vector<Image>& color_seq) {
  if (att_seq.size() < 2 || color_seq.size() != att_seq.size())
    throw std::invalid_argument("temporal_reg: need aligned sequences of length >= 2");
  double s = 0.0;
  for (size_t t = 1; t < att_seq.size(); ++t) {
    s += diff_norm(att_seq[t], att_seq[t - 1]);
    s += diff_norm(color_seq[t], color_seq[t - 1]);
  }
  return s;
}

double generator_objective(double pix, double adv, double reg, double lambda_pix,
                           double lambda_adv, double lambda_reg) {
  if (lambda_pix < 0 || lambda_adv < 0 || lambda_reg < 0)
    throw std::invalid_argument("generator_objective: negative weight");
  return lambda_pix * pix + lambda_adv * adv + lambda_reg * reg;
}

TextureGenerator::TextureGenerator(const TextureGeneratorConfig& config)
    : config_(config) {
  if (config_.resolution % 4 != 0 || config_.resolution < 8)
    throw std::invalid_argument("TextureGenerator: resolution must be div by 4");
  std::mt19937_64 rng(config_.seed);
  const long lmc = config_.lm_channels;
  const long nf = config_.base_channels;
  lm_enc1_ = nn::Conv2dLayer(params_, "g.lme1", 1, lmc, 3, 1, 1, rng);
  lm_enc2_ = nn::Conv2dLayer(params_, "g.lme2", lmc, lmc, 3, 1, 1, rng);
  down1_ = nn::Conv2dLayer(params_, "g.down1", lmc + 3, nf, 4, 2, 1, rng);
  down1_norm_ = nn::InstanceNorm2dLayer(params_, "g.down1n", nf);
  down2_ = nn::Conv2dLayer(params_, "g.down2", nf, 2 * nf, 4, 2, 1, rng);
  down2_norm_ = nn::InstanceNorm2dLayer(params_, "g.down2n", 2 * nf);
  blocks_.resize(static_cast<size_t>(config_.residual_blocks));
  for (long i = 0; i < config_.residual_blocks; ++i) {
    const std::string p = "g.res" + std::to_string(i);
    blocks_[static_cast<size_t>(i)].conv1 =
        nn::Conv2dLayer(params_, p + ".c1", 2 * nf, 2 * nf, 3, 1, 1, rng);
    blocks_[static_cast<size_t>(i)].norm1 =
        nn::InstanceNorm2dLayer(params_, p + ".n1", 2 * nf);
    blocks_[static_cast<size_t>(i)].conv2 =
        nn::Conv2dLayer(params_, p + ".c2", 2 * nf, 2 * nf, 3, 1, 1, rng);
    blocks_[static_cast<size_t>(i)].norm2 =
        nn::InstanceNorm2dLayer(params_, p + ".n2", 2 * nf);
  }
  up1_ = nn::Conv2dLayer(params_, "g.up1", 2 * nf, nf, 3, 1, 1, rng);
  up1_norm_ = nn::InstanceNorm2dLayer(params_, "g.up1n", nf);
  up2_ = nn::Conv2dLayer(params_, "g.up2", nf, nf, 3, 1, 1, rng);
  up2_norm_ = nn::InstanceNorm2dLayer(params_, "g.up2n", nf);
  att_head_ = nn::Conv2dLayer(params_, "g.att", nf, 1, 7, 1, 3, rng);
  color_head_ = nn::Conv2dLayer(params_, "g.color", nf, 3, 7, 1, 3, rng);
  // Attention starts low (~0.12) so the color path receives gradient before
  // the attention map rises toward the identity texture.
  att_head_.b->value.fill(-2.0);
}

Var TextureGenerator::encode_landmarks(const Var& lm) const {
  Var h = nn::leaky_relu(lm_enc1_.forward(lm), config_.leaky_slope);
  return nn::leaky_relu(lm_enc2_.forward(h), config_.leaky_slope);
}

TextureGeneratorOutput TextureGenerator::forward_var(const Var& identity,
                                                     const Var& lm_cur,
                                                     const Var& lm_id) const {
  const long res = config_.resolution;
  auto check = [&](const Var& v, long ch, const char* name) {
    if (v->value.ndim() != 4 || v->value.dim(1) != ch || v->value.dim(2) != res ||
        v->value.dim(3) != res)
      throw std::invalid_argument(std::string("TextureGenerator: bad shape for ") +
                                  name);
  };
  check(identity, 3, "identity");
  check(lm_cur, 1, "lm_cur");
  check(lm_id, 1, "lm_id");

  Var diff = nn::sub(encode_landmarks(lm_cur), encode_landmarks(lm_id));
  Var x = nn::concat_channels(diff, identity);
  x = nn::leaky_relu(down1_norm_.forward(down1_.forward(x)), config_.leaky_slope);
  x = nn::leaky_relu(down2_norm_.forward(down2_.forward(x)), config_.leaky_slope);
  for (const ResBlock& blk : blocks_) {
    Var y = nn::leaky_relu(blk.norm1.forward(blk.conv1.forward(x)),
                           config_.leaky_slope);
    y = blk.norm2.forward(blk.conv2.forward(y));
    x = nn::add(x, y);
  }
  x = nn::leaky_relu(up1_norm_.forward(up1_.forward(nn::upsample_nearest2(x))),
                     config_.leaky_slope);
  x = nn::leaky_relu(up2_norm_.forward(up2_.forward(nn::upsample_nearest2(x))),
                     config_.leaky_slope);

  TextureGeneratorOutput out;
  out.att = nn::sigmoid(att_head_.forward(x));
  out.color = nn::sigmoid(color_head_.forward(x));
  // Eq-style fixed compositing: (1 - att) * color + att * identity.
  Var att3 = nn::concat_channels(nn::concat_channels(out.att, out.att), out.att);
  out.composed = nn::add(nn::mul(nn::affine(att3, -1.0, 1.0), out.color),
                         nn::mul(att3, identity));
  return out;
}

TextureGenerator::FrameResult TextureGenerator::generate_frame(
    const Image& identity, const Image& lm_current, const Image& lm_identity) const {
  const int res = config_.resolution;
  if (identity.height != res || identity.width != res || identity.channels != 3)
    throw std::invalid_argument("generate_frame: identity resolution mismatch");
  if (lm_current.height != res || lm_current.width != res ||
      lm_current.channels != 1 || lm_identity.height != res ||
      lm_identity.width != res || lm_identity.channels != 1)
    throw std::invalid_argument("generate_frame: landmark raster mismatch");
  TextureGeneratorOutput out =
      forward_var(nn::constant(pack_images({&identity})),
                  nn::constant(pack_images({&lm_current})),
                  nn::constant(pack_images({&lm_identity})));
  FrameResult result;
  result.att = unpack_image(out.att->value, 0);
  result.color = unpack_image(out.color->value, 0);
  result.composed = unpack_image(out.composed->value, 0);
  return result;
}

PatchDiscriminator::PatchDiscriminator(const PatchDiscriminatorConfig& config)
    : config_(config) {
  if (config_.strided_layers < 1)
    throw std::invalid_argument("PatchDiscriminator: need >= 1 strided layer");
  std::mt19937_64 rng(config_.seed);
  long in_ch = 3;
  long ch = config_.base_channels;
  for (int i = 0; i < config_.strided_layers; ++i) {
    convs_.push_back(nn::Conv2dLayer(params_, "d.conv" + std::to_string(i), in_ch,
                                     ch, 4, 2, 1, rng));
    if (i > 0)
      norms_.push_back(
          nn::InstanceNorm2dLayer(params_, "d.norm" + std::to_string(i), ch));
    in_ch = ch;
    ch = std::min(ch * 2, 8 * config_.base_channels);
  }
  convs_.push_back(nn::Conv2dLayer(
      params_, "d.conv" + std::to_string(config_.strided_layers), in_ch, ch, 4, 1,
      1, rng));
  norms_.push_back(nn::InstanceNorm2dLayer(
      params_, "d.norm" + std::to_string(config_.strided_layers), ch));
  score_ = nn::Conv2dLayer(params_, "d.score", ch, 1, 4, 1, 1, rng);
}

Var PatchDiscriminator::forward_var(const Var& image) const {
  Var h = nn::leaky_relu(convs_[0].forward(image), config_.leaky_slope);
  for (size_t i = 1; i < convs_.size(); ++i)
    h = nn::leaky_relu(norms_[i - 1].forward(convs_[i].forward(h)),
                       config_.leaky_slope);
  return score_.forward(h);
}

nn::Tensor pack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("pack_images: empty batch");
  const Image& first = *images[0];
  nn::Tensor out({static_cast<long>(images.size()), first.channels, first.height,
                  first.width});
  const long plane = static_cast<long>(first.height) * first.width;
  for (size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (!img.same_shape(first))
      throw std::invalid_argument("pack_images: mixed shapes");
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c)
          out[(static_cast<long>(n) * img.channels + c) * plane + y * img.width + x] =
              img.at(y, x, c);
  }
  return out;
}

Image unpack_image(const nn::Tensor& batch, long index) {
  if (batch.ndim() != 4) throw std::invalid_argument("unpack_image: expected 4-D");
  const long c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  const long plane = h * w;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long k = 0; k < c; ++k)
        img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(k)) =
            batch[(index * c + k) * plane + y * w + x];
  return img;
}

namespace {

nn::Tensor mask3_tensor(const std::vector<const Image*>& masks) {
  const Image& first = *masks[0];
  nn::Tensor out(
      {static_cast<long>(masks.size()), 3, first.height, first.width});
  const long plane = static_cast<long>(first.height) * first.width;
  for (size_t n = 0; n < masks.size(); ++n)
    for (int y = 0; y < first.height; ++y)
      for (int x = 0; x < first.width; ++x) {
        const double v = masks[n]->at(y, x);
        for (long c = 0; c < 3; ++c)
          out[(static_cast<long>(n) * 3 + c) * plane + y * first.width + x] = v;
      }
  return out;
}

}  // namespace

TextureTrainHistory train_texture(TextureGenerator& gen, PatchDiscriminator& disc,
                                  const std::vector<TexturePairSample>& dataset,
                                  const TextureTrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_texture: empty dataset");
  std::mt19937_64 rng(config.seed);
  nn::Adam g_opt(gen.params().vars(), config.adam);
  nn::Adam d_opt(disc.params().vars(), config.adam);
  const bool use_adv = config.lambda_adv > 0.0;
  const long bp = std::max(1L, config.batch_pairs);
  TextureTrainHistory history;

  for (long step = 0; step < config.steps; ++step) {
    std::vector<const Image*> ids, lm_ids, tgt_a, tgt_b, lm_a, lm_b, msk_a, msk_b;
    for (long i = 0; i < bp; ++i) {
      const TexturePairSample& s =
          dataset[std::uniform_int_distribution<size_t>(0, dataset.size() - 1)(rng)];
      ids.push_back(&s.identity_image);
      lm_ids.push_back(&s.identity_landmarks);
      tgt_a.push_back(&s.target_a);
      tgt_b.push_back(&s.target_b);
      lm_a.push_back(&s.landmarks_a);
      lm_b.push_back(&s.landmarks_b);
      msk_a.push_back(&s.mask_a);
      msk_b.push_back(&s.mask_b);
    }
    const Var identity = nn::constant(pack_images(ids));
    const Var lm_id = nn::constant(pack_images(lm_ids));
    const Var truth_a = nn::constant(pack_images(tgt_a));
    const Var truth_b = nn::constant(pack_images(tgt_b));

    TextureGeneratorOutput out_a =
        gen.forward_var(identity, nn::constant(pack_images(lm_a)), lm_id);
    TextureGeneratorOutput out_b =
        gen.forward_var(identity, nn::constant(pack_images(lm_b)), lm_id);

    // Discriminator update on detached fakes.
    double d_loss_value = 0.0;
    if (use_adv) {
      Var fake_a = nn::constant(out_a.composed->value);
      Var fake_b = nn::constant(out_b.composed->value);
      Var real_sc = nn::add(nn::mean(nn::square(nn::affine(
                                disc.forward_var(truth_a), 1.0, -1.0))),
                            nn::mean(nn::square(nn::affine(
                                disc.forward_var(truth_b), 1.0, -1.0))));
      Var fake_sc = nn::add(nn::mean(nn::square(disc.forward_var(fake_a))),
                            nn::mean(nn::square(disc.forward_var(fake_b))));
      Var d_loss = nn::affine(nn::add(real_sc, fake_sc), 0.25, 0.0);
      d_opt.zero_grad();
      nn::backward(d_loss);
      d_opt.step();
      d_loss_value = d_loss->value.item();
    }

    // Generator update.
    const double inv_elems =
        1.0 / static_cast<double>(out_a.composed->value.numel());
    Var pix = nn::affine(
        nn::add(nn::weighted_sum(nn::abs_op(nn::sub(out_a.composed, truth_a)),
                                 mask3_tensor(msk_a)),
                nn::weighted_sum(nn::abs_op(nn::sub(out_b.composed, truth_b)),
                                 mask3_tensor(msk_b))),
        0.5 * inv_elems, 0.0);

    Var g_total = nn::affine(pix, config.lambda_pix, 0.0);
    double adv_value = 0.0;
    if (use_adv) {
      Var adv = nn::affine(
          nn::add(nn::mean(nn::square(
                      nn::affine(disc.forward_var(out_a.composed), 1.0, -1.0))),
                  nn::mean(nn::square(
                      nn::affine(disc.forward_var(out_b.composed), 1.0, -1.0)))),
          0.25, 0.0);
      adv_value = adv->value.item();
      g_total = nn::add(g_total, nn::affine(adv, config.lambda_adv, 0.0));
    }
    double reg_value = 0.0;
    if (config.lambda_reg > 0.0) {
      const double inv_b = 1.0 / static_cast<double>(bp);
      // Per-frame norms, summed over the batch. Each norm is divided by the
      // square root of its element count (an RMS), the same per-element
      // normalization the pixel term uses, so the published lambda balance
      // holds at any resolution.
      const double att_scale =
          1.0 / std::sqrt(static_cast<double>(out_a.att->value.numel() / bp));
      const double color_scale =
          1.0 / std::sqrt(static_cast<double>(out_a.color->value.numel() / bp));
      Var att_pen = nn::affine(
          nn::add(nn::l2_norm_rows(nn::affine(out_a.att, -1.0, 1.0), bp),
                  nn::l2_norm_rows(nn::affine(out_b.att, -1.0, 1.0), bp)),
          att_scale, 0.0);
      Var temp_pen = nn::add(
          nn::affine(nn::l2_norm_rows(nn::sub(out_b.att, out_a.att), bp),
                     att_scale, 0.0),
          nn::affine(nn::l2_norm_rows(nn::sub(out_b.color, out_a.color), bp),
                     color_scale, 0.0));
      Var reg = nn::affine(nn::add(att_pen, temp_pen), inv_b, 0.0);
      reg_value = reg->value.item();
      g_total = nn::add(g_total, nn::affine(reg, config.lambda_reg, 0.0));
    }

    g_opt.zero_grad();
    if (use_adv) d_opt.zero_grad();  // generator pass also reaches D params
    nn::backward(g_total);
    g_opt.step();
    if (use_adv) d_opt.zero_grad();

    double att_mean = 0.0;
    for (long i = 0; i < out_a.att->value.numel(); ++i)
      att_mean += out_a.att->value[i];
    for (long i = 0; i < out_b.att->value.numel(); ++i)
      att_mean += out_b.att->value[i];
    att_mean /= static_cast<double>(out_a.att->value.numel() +
                                    out_b.att->value.numel());

    history.g_total.push_back(g_total->value.item());
    history.pix.push_back(pix->value.item());
    history.adv.push_back(adv_value);
    history.reg.push_back(reg_value);
    history.d_loss.push_back(d_loss_value);
    history.mean_attention.push_back(att_mean);
  }
  return history;
}

struct TextureCheckpointAccess {
  static nn::ParamStore& gen_params(TextureGenerator& g) { return g.params_; }
  static nn::ParamStore& disc_params(PatchDiscriminator& d) { return d.params_; }
};

void save_texture_checkpoint(const TextureGenerator& gen,
                             const PatchDiscriminator& disc,
                             const std::string& path) {
  nn::Checkpoint ckpt;
  ckpt.module = "texture_gen";
  const auto& gc = gen.config();
  const auto& dc = disc.config();
  ckpt.meta = {{"resolution", gc.resolution},
               {"base_channels", gc.base_channels},
               {"lm_channels", gc.lm_channels},
               {"residual_blocks", gc.residual_blocks},
               {"leaky_slope", gc.leaky_slope},
               {"seed", gc.seed},
               {"d_base_channels", dc.base_channels},
               {"d_strided_layers", dc.strided_layers},
               {"d_leaky_slope", dc.leaky_slope},
               {"d_seed", dc.seed}};
  ckpt.tensors = gen.params().snapshot();
  for (const auto& [name, t] : disc.params().snapshot()) ckpt.tensors[name] = t;
  nn::save_checkpoint(ckpt, path);
}

std::pair<TextureGenerator, PatchDiscriminator> load_texture_checkpoint(
    const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "texture_gen")
    throw std::runtime_error("load: not a texture_gen checkpoint: " + path);
  TextureGeneratorConfig gc;
  gc.resolution = ckpt.meta.at("resolution").get<int>();
  gc.base_channels = ckpt.meta.at("base_channels").get<long>();
  gc.lm_channels = ckpt.meta.at("lm_channels").get<long>();
  gc.residual_blocks = ckpt.meta.at("residual_blocks").get<long>();
  gc.leaky_slope = ckpt.meta.at("leaky_slope").get<double>();
  gc.seed = ckpt.meta.at("seed").get<unsigned long long>();
  PatchDiscriminatorConfig dc;
  dc.base_channels = ckpt.meta.at("d_base_channels").get<long>();
  dc.strided_layers = ckpt.meta.at("d_strided_layers").get<int>();
  dc.leaky_slope = ckpt.meta.at("d_leaky_slope").get<double>();
  dc.seed = ckpt.meta.at("d_seed").get<unsigned long long>();
  std::pair<TextureGenerator, PatchDiscriminator> pair{TextureGenerator(gc),
                                                       PatchDiscriminator(dc)};
  TextureCheckpointAccess::gen_params(pair.first).restore(ckpt.tensors);
  TextureCheckpointAccess::disc_params(pair.second).restore(ckpt.tensors);
  return pair;
}

}  // namespace tfg
