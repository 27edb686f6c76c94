#include "tfg/blink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tfg/nn/serialize.hpp"

namespace tfg {

using nn::Var;

void BlinkSequence::validate(const char* where) const {
  if (deltas.rows() < 1 || deltas.cols() != kEyeDisplacementDim)
    throw std::invalid_argument(std::string(where) + ": expected T x 44 deltas");
  if (!deltas.allFinite())
    throw std::invalid_argument(std::string(where) + ": non-finite deltas");
}

namespace {

Eigen::MatrixXd flatten_batch(const std::vector<BlinkSequence>& batch,
                              const char* where) {
  if (batch.empty()) throw std::invalid_argument(std::string(where) + ": empty batch");
  const long t = batch[0].length();
  Eigen::MatrixXd out(static_cast<long>(batch.size()), t * kEyeDisplacementDim);
  for (size_t i = 0; i < batch.size(); ++i) {
    batch[i].validate(where);
    if (batch[i].length() != t)
      throw std::invalid_argument(std::string(where) + ": ragged sequence lengths");
    for (long r = 0; r < t; ++r)
      for (long c = 0; c < kEyeDisplacementDim; ++c)
        out(static_cast<long>(i), r * kEyeDisplacementDim + c) = batch[i].deltas(r, c);
  }
  return out;
}

}  // namespace

double mmd_loss(const std::vector<BlinkSequence>& real,
                const std::vector<BlinkSequence>& fake, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("mmd_loss: sigma must be positive");
  const Eigen::MatrixXd x = flatten_batch(real, "mmd_loss(real)");
  const Eigen::MatrixXd y = flatten_batch(fake, "mmd_loss(fake)");
  if (x.cols() != y.cols())
    throw std::invalid_argument("mmd_loss: real/fake shape mismatch");
  const long n = x.rows(), m = y.rows();
  auto kernel = [sigma](const auto& a, const auto& b) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * sigma));
  };
  double xx = 0.0, xy = 0.0, yy = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) xx += kernel(x.row(i), x.row(j));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) xy += kernel(x.row(i), y.row(j));
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j) yy += kernel(y.row(i), y.row(j));
  return xx / static_cast<double>(n * n) - 2.0 * xy / static_cast<double>(n * m) +
         yy / static_cast<double>(m * m);
}

double range_regularizer(const BlinkSequence& fake, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  fake.validate("range_regularizer");
  if (lo.size() != kEyeDisplacementDim || hi.size() != kEyeDisplacementDim)
    throw std::invalid_argument("range_regularizer: bounds must have 44 entries");
  if ((lo.array() > hi.array()).any())
    throw std::invalid_argument("range_regularizer: lo must be <= hi");
  double penalty = 0.0;
  for (long t = 0; t < fake.length(); ++t)
    for (long c = 0; c < kEyeDisplacementDim; ++c) {
      const double v = fake.deltas(t, c);
      if (v > hi(c)) penalty += (v - hi(c)) * (v - hi(c));
      else if (v < lo(c)) penalty += (lo(c) - v) * (lo(c) - v);
    }
  return penalty;
}

BlinkGenerator::BlinkGenerator(const PcaBasis& basis,
                               const BlinkGeneratorConfig& config)
    : config_(config), basis_(basis) {
  if (basis_.dim() != kEyeDisplacementDim)
    throw std::invalid_argument("BlinkGenerator: PCA dim must be 44");
  std::mt19937_64 rng(config_.seed);
  gru_ = nn::GruLayer(params_, "gru", config_.noise_dim, config_.hidden, rng);
  const long k = basis_.num_components();
  fc_code_ = nn::LinearLayer(params_, "dec.fc1", config_.hidden, k, rng);
  fc_out_ = nn::LinearLayer(params_, "dec.fc2", k, kEyeDisplacementDim, rng);
  for (long o = 0; o < kEyeDisplacementDim; ++o)
    for (long i = 0; i < k; ++i)
      fc_out_.w->value[o * k + i] = basis_.components(i, o);
  for (long o = 0; o < kEyeDisplacementDim; ++o) fc_out_.b->value[o] = basis_.mean(o);
}

std::vector<Var> BlinkGenerator::forward_var(const nn::Tensor& noise) const {
  if (noise.ndim() != 3 || noise.dim(2) != config_.noise_dim)
    throw std::invalid_argument("BlinkGenerator: expected noise [B,T,noise_dim]");
  const long b = noise.dim(0), t_len = noise.dim(1), nd = noise.dim(2);
  std::vector<Var> outputs;
  outputs.reserve(static_cast<size_t>(t_len));
  Var h = gru_.initial_state(b);
  for (long t = 0; t < t_len; ++t) {
    nn::Tensor step({b, nd});
    for (long i = 0; i < b; ++i)
      for (long j = 0; j < nd; ++j) step[i * nd + j] = noise[(i * t_len + t) * nd + j];
    h = gru_.step(nn::constant(std::move(step)), h);
    outputs.push_back(fc_out_.forward(fc_code_.forward(h)));
  }
  return outputs;
}

BlinkSequence BlinkGenerator::generate(long frames, unsigned long long seed) const {
  if (frames < 1) throw std::invalid_argument("generate: frames must be >= 1");
  std::mt19937_64 rng(seed);
  const nn::Tensor noise = nn::random_normal({1, frames, config_.noise_dim}, rng);
  const std::vector<Var> outs = forward_var(noise);
  BlinkSequence seq;
  seq.deltas.resize(frames, kEyeDisplacementDim);
  for (long t = 0; t < frames; ++t)
    for (long c = 0; c < kEyeDisplacementDim; ++c)
      seq.deltas(t, c) = outs[static_cast<size_t>(t)]->value[c];
  seq.validate("generate");
  return seq;
}

void BlinkGenerator::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.module = "blink_gen";
  ckpt.meta = {{"noise_dim", config_.noise_dim},
               {"hidden", config_.hidden},
               {"seed", config_.seed},
               {"pca_components", basis_.num_components()}};
  ckpt.tensors = params_.snapshot();
  const long k = basis_.num_components();
  nn::Tensor comp({k, static_cast<long>(kEyeDisplacementDim)});
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < kEyeDisplacementDim; ++j)
      comp[i * kEyeDisplacementDim + j] = basis_.components(i, j);
  nn::Tensor mean({static_cast<long>(kEyeDisplacementDim)});
  for (long j = 0; j < kEyeDisplacementDim; ++j) mean[j] = basis_.mean(j);
  nn::Tensor evr({k});
  for (long i = 0; i < k; ++i) evr[i] = basis_.explained_variance_ratio(i);
  ckpt.tensors["pca.components"] = comp;
  ckpt.tensors["pca.mean"] = mean;
  ckpt.tensors["pca.evr"] = evr;
  nn::save_checkpoint(ckpt, path);
}

BlinkGenerator BlinkGenerator::load(const std::string& path) {
  nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.module != "blink_gen")
    throw std::runtime_error("load: not a blink_gen checkpoint: " + path);
  BlinkGeneratorConfig config;
  config.noise_dim = ckpt.meta.at("noise_dim").get<long>();
  config.hidden = ckpt.meta.at("hidden").get<long>();
  config.seed = ckpt.meta.at("seed").get<unsigned long long>();
  const nn::Tensor& comp = ckpt.tensors.at("pca.components");
  PcaBasis basis;
  const long k = comp.dim(0);
  basis.components.resize(k, kEyeDisplacementDim);
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < kEyeDisplacementDim; ++j)
      basis.components(i, j) = comp[i * kEyeDisplacementDim + j];
  basis.mean.resize(kEyeDisplacementDim);
  const nn::Tensor& mean = ckpt.tensors.at("pca.mean");
  for (long j = 0; j < kEyeDisplacementDim; ++j) basis.mean(j) = mean[j];
  const nn::Tensor& evr = ckpt.tensors.at("pca.evr");
  basis.explained_variance_ratio.resize(k);
  for (long i = 0; i < k; ++i) basis.explained_variance_ratio(i) = evr[i];
  BlinkGenerator gen(basis, config);
  gen.params_.restore(ckpt.tensors);
  return gen;
}

namespace {

double median_pairwise_sqdist(const Eigen::MatrixXd& rows) {
  std::vector<double> dists;
  for (long i = 0; i < rows.rows(); ++i)
    for (long j = i + 1; j < rows.rows(); ++j)
      dists.push_back((rows.row(i) - rows.row(j)).squaredNorm());
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2),
                   dists.end());
  const double med = dists[dists.size() / 2];
  return med > 1e-12 ? med : 1.0;
}

}  // namespace

BlinkTrainResult train_blink(BlinkGenerator& gen,
                             const std::vector<BlinkSequence>& real_sequences,
                             const BlinkTrainConfig& config) {
  if (real_sequences.empty())
    throw std::invalid_argument("train_blink: empty training data");
  const long t_len = config.sequence_length;
  for (const BlinkSequence& s : real_sequences) {
    s.validate("train_blink");
    if (s.length() < t_len)
      throw std::invalid_argument("train_blink: sequence shorter than T");
  }

  BlinkTrainResult result;
  result.lo = Eigen::VectorXd::Constant(kEyeDisplacementDim,
                                        std::numeric_limits<double>::max());
  result.hi = Eigen::VectorXd::Constant(kEyeDisplacementDim,
                                        std::numeric_limits<double>::lowest());
  for (const BlinkSequence& s : real_sequences) {
    result.lo = result.lo.cwiseMin(s.deltas.colwise().minCoeff().transpose());
    result.hi = result.hi.cwiseMax(s.deltas.colwise().maxCoeff().transpose());
  }

  std::mt19937_64 rng(config.seed);
  nn::Adam opt(gen.params().vars(), config.adam);
  const long batch = std::max(1L, config.batch);
  const long flat = t_len * kEyeDisplacementDim;

  nn::Tensor lo_b({batch, static_cast<long>(kEyeDisplacementDim)});
  nn::Tensor hi_b({batch, static_cast<long>(kEyeDisplacementDim)});
  for (long i = 0; i < batch; ++i)
    for (long c = 0; c < kEyeDisplacementDim; ++c) {
      lo_b[i * kEyeDisplacementDim + c] = result.lo(c);
      hi_b[i * kEyeDisplacementDim + c] = result.hi(c);
    }
  const Var lo_const = nn::constant(lo_b);
  const Var hi_const = nn::constant(hi_b);

  for (long step = 0; step < config.steps; ++step) {
    Eigen::MatrixXd real(batch, flat);
    for (long i = 0; i < batch; ++i) {
      const auto& s = real_sequences[std::uniform_int_distribution<size_t>(
          0, real_sequences.size() - 1)(rng)];
      const long start =
          std::uniform_int_distribution<long>(0, s.length() - t_len)(rng);
      for (long r = 0; r < t_len; ++r)
        for (long c = 0; c < kEyeDisplacementDim; ++c)
          real(i, r * kEyeDisplacementDim + c) = s.deltas(start + r, c);
    }
    const double sigma = median_pairwise_sqdist(real);

    const nn::Tensor noise =
        nn::random_normal({batch, t_len, gen.config().noise_dim}, rng);
    const std::vector<Var> outs = gen.forward_var(noise);
    Var fake = nn::concat_cols(outs);

    nn::Tensor real_t({batch, flat});
    for (long i = 0; i < batch; ++i)
      for (long j = 0; j < flat; ++j) real_t[i * flat + j] = real(i, j);
    const Var real_const = nn::constant(std::move(real_t));

    // Biased MMD^2; the real-real term is a constant offset kept for logging.
    double kxx = 0.0;
    for (long i = 0; i < batch; ++i)
      for (long j = 0; j < batch; ++j)
        kxx += std::exp(-(real.row(i) - real.row(j)).squaredNorm() / (2.0 * sigma));
    kxx /= static_cast<double>(batch * batch);
    Var k_xy = nn::mean(nn::exp_op(nn::affine(
        nn::pairwise_sqdist(real_const, fake), -1.0 / (2.0 * sigma), 0.0)));
    Var k_yy = nn::mean(nn::exp_op(
        nn::affine(nn::pairwise_sqdist(fake, fake), -1.0 / (2.0 * sigma), 0.0)));
    Var mmd = nn::add(nn::affine(k_xy, -2.0, kxx), k_yy);

    Var penalty;
    for (const Var& out : outs) {
      Var over = nn::sum(nn::square(nn::relu(nn::sub(out, hi_const))));
      Var under = nn::sum(nn::square(nn::relu(nn::sub(lo_const, out))));
      Var p = nn::add(over, under);
      penalty = penalty ? nn::add(penalty, p) : p;
    }
    penalty = nn::affine(penalty, 1.0 / static_cast<double>(batch), 0.0);

    Var loss = nn::add(mmd, nn::affine(penalty, config.range_weight, 0.0));
    opt.zero_grad();
    nn::backward(loss);
    opt.step();
    result.loss_history.push_back(loss->value.item());
  }
  return result;
}

std::vector<LandmarkSet> impose_blinks(const std::vector<LandmarkSet>& landmarks,
                                       const BlinkSequence& blinks) {
  blinks.validate("impose_blinks");
  if (static_cast<long>(landmarks.size()) != blinks.length())
    throw std::invalid_argument("impose_blinks: length mismatch");
  std::vector<LandmarkSet> out = landmarks;
  const auto& idx = eye_region_indices();
  for (long t = 0; t < blinks.length(); ++t)
    for (int k = 0; k < kEyeRegionSize; ++k) {
      out[static_cast<size_t>(t)].points(idx[static_cast<size_t>(k)], 0) +=
          blinks.deltas(t, 2 * k);
      out[static_cast<size_t>(t)].points(idx[static_cast<size_t>(k)], 1) +=
          blinks.deltas(t, 2 * k + 1);
    }
  return out;
}

double eye_aspect_ratio(const LandmarkSet& lm) {
  auto ear_of = [&lm](int base) {
    const Eigen::Vector2d p1 = lm.point(base), p2 = lm.point(base + 1),
                          p3 = lm.point(base + 2), p4 = lm.point(base + 3),
                          p5 = lm.point(base + 4), p6 = lm.point(base + 5);
    const double horiz = (p1 - p4).norm();
    if (horiz < 1e-12) return 0.0;
    return ((p2 - p6).norm() + (p3 - p5).norm()) / (2.0 * horiz);
  };
  return 0.5 * (ear_of(36) + ear_of(42));
}

BlinkStats detect_blinks(const std::vector<LandmarkSet>& frames, double fps,
                         const BlinkDetectorConfig& config) {
  if (frames.size() < 2)
    throw std::invalid_argument("detect_blinks: need at least 2 frames");
  if (fps <= 0) throw std::invalid_argument("detect_blinks: fps must be positive");

  std::vector<std::pair<long, long>> runs;  // [start, end)
  bool closed = false;
  long start = 0;
  for (long t = 0; t < static_cast<long>(frames.size()); ++t) {
    const double ear = eye_aspect_ratio(frames[static_cast<size_t>(t)]);
    if (!closed && ear < config.close_threshold) {
      closed = true;
      start = t;
    } else if (closed && ear >= config.reopen_threshold) {
      closed = false;
      if (t - start >= config.min_frames) runs.emplace_back(start, t);
    }
  }
  if (closed && static_cast<long>(frames.size()) - start >= config.min_frames)
    runs.emplace_back(start, static_cast<long>(frames.size()));

  BlinkStats stats;
  stats.blink_count = static_cast<long>(runs.size());
  const double total_seconds = static_cast<double>(frames.size()) / fps;
  stats.blink_rate = static_cast<double>(runs.size()) / total_seconds;
  for (const auto& [s, e] : runs)
    stats.durations.push_back(static_cast<double>(e - s) / fps);
  if (!runs.empty()) {
    double sum = 0.0;
    for (double d : stats.durations) sum += d;
    stats.mean_blink_duration = sum / static_cast<double>(runs.size());
  }
  if (runs.size() >= 2) {
    double gap = 0.0;
    for (size_t i = 0; i + 1 < runs.size(); ++i)
      gap += static_cast<double>(runs[i + 1].first - runs[i].second) / fps;
    stats.mean_inter_blink = gap / static_cast<double>(runs.size() - 1);
  }
  return stats;
}

BlinkStats detect_blinks_on_base(const BlinkSequence& blinks,
                                 const LandmarkSet& base, double fps,
                                 const BlinkDetectorConfig& config) {
  std::vector<LandmarkSet> frames(static_cast<size_t>(blinks.length()), base);
  return detect_blinks(impose_blinks(frames, blinks), fps, config);
}

}  // namespace tfg
