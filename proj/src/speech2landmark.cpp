#include "tfg/speech2landmark.hpp"

#include <cmath>
#include <stdexcept>

#include "tfg/nn/serialize.hpp"

namespace tfg {

using nn::Var;

PcaBasis pca_fit(const std::vector<CanonicalDisplacement>& displacements,
                 double variance_target) {
  if (displacements.size() < 2)
    throw std::invalid_argument("pca_fit: need at least 2 displacement samples");
  Eigen::MatrixXd samples(static_cast<long>(displacements.size()), kDisplacementDim);
  for (size_t i = 0; i < displacements.size(); ++i)
    for (int j = 0; j < kNumLandmarks; ++j) {
      samples(static_cast<long>(i), 2 * j) = displacements[i].deltas(j, 0);
      samples(static_cast<long>(i), 2 * j + 1) = displacements[i].deltas(j, 1);
    }
  return pca_fit_matrix(samples, variance_target);
}

Speech2LandmarkModel::Speech2LandmarkModel(const PcaBasis& basis,
                                           const Speech2LandmarkConfig& config)
    : config_(config), basis_(basis) {
  if (basis_.dim() != kDisplacementDim)
    throw std::invalid_argument("Speech2LandmarkModel: PCA dim must be 136");
  std::mt19937_64 rng(config_.seed);
  const auto& ch = config_.conv_channels;
  convs_[0] = nn::Conv2dLayer(params_, "enc.conv1", 1, ch[0], 3, 2, 1, rng);
  convs_[1] = nn::Conv2dLayer(params_, "enc.conv2", ch[0], ch[1], 3, 2, 1, rng);
  convs_[2] = nn::Conv2dLayer(params_, "enc.conv3", ch[1], ch[2], 3, 2, 1, rng);
  convs_[3] = nn::Conv2dLayer(params_, "enc.conv4", ch[2], ch[3], 3, 2, 1, rng);
  const long k = basis_.num_components();
  fc_code_ = nn::LinearLayer(params_, "dec.fc1", config_.code_dim(), k, rng);
  fc_out_ = nn::LinearLayer(params_, "dec.fc2", k, kDisplacementDim, rng);
  // Decoder output layer starts as the PCA reconstruction map.
  for (long o = 0; o < kDisplacementDim; ++o)
    for (long i = 0; i < k; ++i)
      fc_out_.w->value[o * k + i] = basis_.components(i, o);
  for (long o = 0; o < kDisplacementDim; ++o)
    fc_out_.b->value[o] = basis_.mean(o);
}

Var Speech2LandmarkModel::forward_var(const Var& input) const {
  if (input->value.ndim() != 4 || input->value.dim(1) != 1 ||
      input->value.dim(2) != kAudioWindowFrames ||
      input->value.dim(3) != kAudioFeatureDim)
    throw std::invalid_argument("forward: expected [B,1,16,29] input");
  if (!input->value.all_finite())
    throw std::invalid_argument("forward: non-finite input");
  Var h = input;
  for (const auto& conv : convs_)
    h = nn::leaky_relu(conv.forward(h), config_.leaky_slope);
  h = nn::reshape(h, {h->value.dim(0), config_.code_dim()});
  h = fc_code_.forward(h);
  return fc_out_.forward(h);
}

CanonicalDisplacement Speech2LandmarkModel::forward(
    const AudioFeatureWindow& window) const {
  Var out = forward_var(nn::constant(pack_windows({window})));
  if (!out->value.all_finite())
    throw std::runtime_error("forward: non-finite output");
  return unpack_displacement(out->value, 0);
}

void Speech2LandmarkModel::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.module = "speech2landmark";
  ckpt.meta = {
      {"conv_channels", config_.conv_channels},
      {"leaky_slope", config_.leaky_slope},
      {"seed", config_.seed},
      {"pca_components", basis_.num_components()},
  };
  ckpt.tensors = params_.snapshot();
  const long k = basis_.num_components();
  nn::Tensor comp({k, kDisplacementDim});
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < kDisplacementDim; ++j)
      comp[i * kDisplacementDim + j] = basis_.components(i, j);
  nn::Tensor mean({kDisplacementDim});
  for (long j = 0; j < kDisplacementDim; ++j) mean[j] = basis_.mean(j);
  nn::Tensor evr({k});
  for (long i = 0; i < k; ++i) evr[i] = basis_.explained_variance_ratio(i);
  ckpt.tensors["pca.components"] = comp;
  ckpt.tensors["pca.mean"] = mean;
  ckpt.tensors["pca.evr"] = evr;
  nn::save_checkpoint(ckpt, path);
}

Speech2LandmarkModel Speech2LandmarkModel::load(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "speech2landmark")
    throw std::runtime_error("load: not a speech2landmark checkpoint: " + path);
  Speech2LandmarkConfig config;
  config.conv_channels = ckpt.meta.at("conv_channels").get<std::array<long, 4>>();
  config.leaky_slope = ckpt.meta.at("leaky_slope").get<double>();
  config.seed = ckpt.meta.at("seed").get<unsigned long long>();

  const nn::Tensor& comp = ckpt.tensors.at("pca.components");
  const nn::Tensor& mean = ckpt.tensors.at("pca.mean");
  const nn::Tensor& evr = ckpt.tensors.at("pca.evr");
  PcaBasis basis;
  const long k = comp.dim(0);
  basis.components.resize(k, kDisplacementDim);
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < kDisplacementDim; ++j)
      basis.components(i, j) = comp[i * kDisplacementDim + j];
  basis.mean.resize(kDisplacementDim);
  for (long j = 0; j < kDisplacementDim; ++j) basis.mean(j) = mean[j];
  basis.explained_variance_ratio.resize(k);
  for (long i = 0; i < k; ++i) basis.explained_variance_ratio(i) = evr[i];

  Speech2LandmarkModel model(basis, config);
  model.params_.restore(ckpt.tensors);
  return model;
}

double loss_lmark(const CanonicalDisplacement& pred,
                  const CanonicalDisplacement& truth) {
  return (pred.deltas - truth.deltas).squaredNorm();
}

double loss_temp(const CanonicalDisplacement& pred_t,
                 const CanonicalDisplacement& pred_t1,
                 const CanonicalDisplacement& truth_t,
                 const CanonicalDisplacement& truth_t1) {
  const LandmarkMatrix pred_delta = pred_t1.deltas - pred_t.deltas;
  const LandmarkMatrix truth_delta = truth_t1.deltas - truth_t.deltas;
  return (truth_delta - pred_delta).squaredNorm();
}

double loss_total(double lmark, double temp, double lambda_lmark,
                  double lambda_temp) {
  if (lambda_lmark < 0 || lambda_temp < 0)
    throw std::invalid_argument("loss_total: negative weight");
  return lambda_lmark * lmark + lambda_temp * temp;
}

nn::Tensor pack_windows(const std::vector<AudioFeatureWindow>& windows) {
  if (windows.empty()) throw std::invalid_argument("pack_windows: empty batch");
  const long b = static_cast<long>(windows.size());
  nn::Tensor out({b, 1, kAudioWindowFrames, kAudioFeatureDim});
  for (long n = 0; n < b; ++n)
    for (int i = 0; i < kAudioWindowFrames; ++i)
      for (int j = 0; j < kAudioFeatureDim; ++j)
        out[(n * kAudioWindowFrames + i) * kAudioFeatureDim + j] =
            windows[static_cast<size_t>(n)].logits(i, j);
  return out;
}

CanonicalDisplacement unpack_displacement(const nn::Tensor& t, long row) {
  CanonicalDisplacement d;
  for (int j = 0; j < kNumLandmarks; ++j) {
    d.deltas(j, 0) = t[row * kDisplacementDim + 2 * j];
    d.deltas(j, 1) = t[row * kDisplacementDim + 2 * j + 1];
  }
  return d;
}

namespace {

nn::Tensor pack_targets(const std::vector<const CanonicalDisplacement*>& targets) {
  const long b = static_cast<long>(targets.size());
  nn::Tensor out({b, kDisplacementDim});
  for (long n = 0; n < b; ++n)
    for (int j = 0; j < kNumLandmarks; ++j) {
      out[n * kDisplacementDim + 2 * j] = targets[static_cast<size_t>(n)]->deltas(j, 0);
      out[n * kDisplacementDim + 2 * j + 1] =
          targets[static_cast<size_t>(n)]->deltas(j, 1);
    }
  return out;
}

}  // namespace

TrainHistory train_speech2landmark(Speech2LandmarkModel& model,
                                   const std::vector<LandmarkClip>& dataset,
                                   const LandmarkTrainConfig& config) {
  if (dataset.empty())
    throw std::invalid_argument("train_speech2landmark: empty dataset");
  for (const LandmarkClip& clip : dataset) {
    if (clip.windows.size() != clip.targets.size() || clip.windows.size() < 2)
      throw std::invalid_argument(
          "train_speech2landmark: clip needs >= 2 aligned frames");
  }

  std::mt19937_64 rng(config.seed);
  nn::Adam opt(model.params().vars(), config.adam);
  TrainHistory history;
  const long batch = std::max(1L, config.batch);

  for (long step = 0; step < config.steps; ++step) {
    std::vector<AudioFeatureWindow> win_t, win_t1;
    std::vector<const CanonicalDisplacement*> tgt_t, tgt_t1;
    for (long i = 0; i < batch; ++i) {
      const auto& clip =
          dataset[std::uniform_int_distribution<size_t>(0, dataset.size() - 1)(rng)];
      const size_t pos = std::uniform_int_distribution<size_t>(
          0, clip.windows.size() - 2)(rng);
      win_t.push_back(clip.windows[pos]);
      win_t1.push_back(clip.windows[pos + 1]);
      tgt_t.push_back(&clip.targets[pos]);
      tgt_t1.push_back(&clip.targets[pos + 1]);
    }
    Var pred_t = model.forward_var(nn::constant(pack_windows(win_t)));
    Var pred_t1 = model.forward_var(nn::constant(pack_windows(win_t1)));
    Var truth_t = nn::constant(pack_targets(tgt_t));
    Var truth_t1 = nn::constant(pack_targets(tgt_t1));

    // Per-frame squared L2, averaged over the batch.
    const double inv_b = 1.0 / static_cast<double>(batch);
    Var l_lmark = nn::affine(
        nn::add(nn::sum(nn::square(nn::sub(pred_t, truth_t))),
                nn::sum(nn::square(nn::sub(pred_t1, truth_t1)))),
        0.5 * inv_b, 0.0);
    Var l_temp = nn::affine(
        nn::sum(nn::square(
            nn::sub(nn::sub(truth_t1, truth_t), nn::sub(pred_t1, pred_t)))),
        inv_b, 0.0);
    Var total = nn::add(nn::affine(l_lmark, config.lambda_lmark, 0.0),
                        nn::affine(l_temp, config.lambda_temp, 0.0));

    opt.zero_grad();
    nn::backward(total);
    opt.step();

    history.total.push_back(total->value.item());
    history.lmark.push_back(l_lmark->value.item());
    history.temp.push_back(l_temp->value.item());
  }
  return history;
}

}  // namespace tfg
