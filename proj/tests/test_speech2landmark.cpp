#include <random>

#include "doctest.h"
#include "tfg/speech2landmark.hpp"
#include "tfg/synth.hpp"

using namespace tfg;

namespace {

CanonicalDisplacement random_delta(std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  CanonicalDisplacement d;
  for (int i = 0; i < kNumLandmarks; ++i) d.deltas.row(i) << u(rng), u(rng);
  return d;
}

PcaBasis small_basis(std::mt19937_64& rng, long samples = 60) {
  std::vector<CanonicalDisplacement> data;
  // Low-rank data: 3 random directions.
  std::vector<CanonicalDisplacement> dirs{random_delta(rng), random_delta(rng),
                                          random_delta(rng)};
  std::normal_distribution<double> coeff(0.0, 1.0);
  for (long i = 0; i < samples; ++i) {
    CanonicalDisplacement d;
    d.deltas.setZero();
    for (const auto& dir : dirs) d.deltas += coeff(rng) * dir.deltas;
    data.push_back(d);
  }
  return pca_fit(data, 0.99);
}

AudioFeatureWindow random_window(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  AudioFeatureWindow w;
  for (int i = 0; i < kAudioWindowFrames; ++i)
    for (int j = 0; j < kAudioFeatureDim; ++j) w.logits(i, j) = u(rng);
  return w;
}

Speech2LandmarkConfig tiny_config() {
  Speech2LandmarkConfig c;
  c.conv_channels = {2, 3, 4, 4};
  c.seed = 5;
  return c;
}

// Two-frame total loss graph, matching the training construction.
nn::Var total_loss_graph(const Speech2LandmarkModel& model,
                         const AudioFeatureWindow& w0, const AudioFeatureWindow& w1,
                         const CanonicalDisplacement& t0,
                         const CanonicalDisplacement& t1, double l_lmark,
                         double l_temp) {
  nn::Var p0 = model.forward_var(nn::constant(pack_windows({w0})));
  nn::Var p1 = model.forward_var(nn::constant(pack_windows({w1})));
  nn::Tensor tt0({1, kDisplacementDim}), tt1({1, kDisplacementDim});
  for (int j = 0; j < kNumLandmarks; ++j) {
    tt0[2 * j] = t0.deltas(j, 0);
    tt0[2 * j + 1] = t0.deltas(j, 1);
    tt1[2 * j] = t1.deltas(j, 0);
    tt1[2 * j + 1] = t1.deltas(j, 1);
  }
  nn::Var c0 = nn::constant(tt0), c1 = nn::constant(tt1);
  nn::Var lmark = nn::add(nn::sum(nn::square(nn::sub(p0, c0))),
                          nn::sum(nn::square(nn::sub(p1, c1))));
  nn::Var temp = nn::sum(
      nn::square(nn::sub(nn::sub(c1, c0), nn::sub(p1, p0))));
  return nn::add(nn::affine(lmark, l_lmark, 0.0), nn::affine(temp, l_temp, 0.0));
}

}  // namespace

TEST_CASE("loss_lmark basics and summation oracle") {
  std::mt19937_64 rng(1);
  const CanonicalDisplacement x = random_delta(rng);
  CHECK(loss_lmark(x, x) == 0.0);

  CanonicalDisplacement y = x;
  y.deltas(12, 1) += 1.0;
  CHECK(loss_lmark(y, x) == doctest::Approx(1.0).epsilon(1e-12));

  const CanonicalDisplacement a = random_delta(rng), b = random_delta(rng);
  double oracle = 0.0;
  for (int i = 0; i < kNumLandmarks; ++i)
    for (int c = 0; c < 2; ++c) {
      const double d = a.deltas(i, c) - b.deltas(i, c);
      oracle += d * d;
    }
  CHECK(std::abs(loss_lmark(a, b) - oracle) < 1e-9);
}

TEST_CASE("loss_temp is offset-invariant and matches the direct formula") {
  std::mt19937_64 rng(2);
  const CanonicalDisplacement t0 = random_delta(rng), t1 = random_delta(rng);
  CanonicalDisplacement p0 = t0, p1 = t1;
  // Constant offset on both predicted frames leaves the temporal term alone.
  p0.deltas.array() += 2.5;
  p1.deltas.array() += 2.5;
  CHECK(loss_temp(p0, p1, t0, t1) < 1e-18);

  CHECK(loss_temp(t0, t0, t1, t1) == 0.0);  // static on both sides

  const CanonicalDisplacement a = random_delta(rng), b = random_delta(rng),
                              c = random_delta(rng), d = random_delta(rng);
  double oracle = 0.0;
  for (int i = 0; i < kNumLandmarks; ++i)
    for (int k = 0; k < 2; ++k) {
      const double diff =
          (d.deltas(i, k) - c.deltas(i, k)) - (b.deltas(i, k) - a.deltas(i, k));
      oracle += diff * diff;
    }
  CHECK(std::abs(loss_temp(a, b, c, d) - oracle) < 1e-9);
}

TEST_CASE("loss_total arithmetic and defaults") {
  CHECK(loss_total(2.0, 4.0, 1.0, 0.5) == doctest::Approx(4.0));
  CHECK(loss_total(3.7, 9.9, 1.0, 0.0) == doctest::Approx(3.7));
  CHECK_THROWS_AS(loss_total(1.0, 1.0, -1.0, 0.5), std::invalid_argument);
}

TEST_CASE("zero final layer maps every window to zero displacement") {
  std::mt19937_64 rng(3);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  model.final_layer().w->value.fill(0.0);
  model.final_layer().b->value.fill(0.0);
  for (int i = 0; i < 3; ++i) {
    const CanonicalDisplacement out = model.forward(random_window(rng));
    CHECK(out.deltas.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("eval forward is deterministic") {
  std::mt19937_64 rng(4);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  const AudioFeatureWindow w = random_window(rng);
  const CanonicalDisplacement a = model.forward(w);
  const CanonicalDisplacement b = model.forward(w);
  CHECK((a.deltas - b.deltas).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward rejects non-finite input") {
  std::mt19937_64 rng(5);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  AudioFeatureWindow w = random_window(rng);
  w.logits(3, 3) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(model.forward(w), std::invalid_argument);
}

TEST_CASE("decoder output layer starts at the PCA reconstruction") {
  std::mt19937_64 rng(6);
  const PcaBasis basis = small_basis(rng);
  Speech2LandmarkModel model(basis, tiny_config());
  const long k = basis.num_components();
  for (long o = 0; o < kDisplacementDim; ++o) {
    CHECK(model.final_layer().b->value[o] == doctest::Approx(basis.mean(o)));
    for (long i = 0; i < k; ++i)
      CHECK(model.final_layer().w->value[o * k + i] ==
            doctest::Approx(basis.components(i, o)));
  }
}

TEST_CASE("analytic gradient of the total loss matches finite differences") {
  std::mt19937_64 rng(7);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  REQUIRE(model.params().total_params() < 10000);
  const AudioFeatureWindow w0 = random_window(rng), w1 = random_window(rng);
  const CanonicalDisplacement t0 = random_delta(rng), t1 = random_delta(rng);
  auto loss = [&] { return total_loss_graph(model, w0, w1, t0, t1, 1.0, 0.5); };
  CHECK(nn::gradcheck_max_rel_error(loss, model.params().vars()) < 1e-3);
}

TEST_CASE("gradient of the weighted total equals the weighted component sum") {
  std::mt19937_64 rng(8);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  const AudioFeatureWindow w0 = random_window(rng), w1 = random_window(rng);
  const CanonicalDisplacement t0 = random_delta(rng), t1 = random_delta(rng);

  auto grad_of = [&](double ll, double lt) {
    nn::zero_grad(model.params().vars());
    nn::backward(total_loss_graph(model, w0, w1, t0, t1, ll, lt));
    std::vector<double> g;
    for (const nn::Var& p : model.params().vars())
      for (long i = 0; i < p->grad.numel(); ++i) g.push_back(p->grad[i]);
    nn::zero_grad(model.params().vars());
    return g;
  };
  const auto g_lmark = grad_of(1.0, 0.0);
  const auto g_temp = grad_of(0.0, 1.0);
  const auto g_total = grad_of(1.0, 0.5);
  for (size_t i = 0; i < g_total.size(); ++i)
    CHECK(g_total[i] == doctest::Approx(g_lmark[i] + 0.5 * g_temp[i]).epsilon(1e-9));
}

namespace {

// One synthetic clip: mouth motion driving both features and displacements.
LandmarkClip make_clip(long frames, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  const LandmarkSet mean = synth::template_face();
  const std::vector<double> amounts =
      synth::smooth_motion_profile(frames, 25.0, rng, 0.9);
  const FeatureTrack track = synth::features_from_motion(amounts, 25.0, 400.0);
  LandmarkClip clip;
  clip.windows = window_track(track, frames);
  for (double a : amounts) {
    CanonicalDisplacement d;
    d.deltas = synth::open_mouth(mean, a).points - mean.points;
    clip.targets.push_back(d);
  }
  return clip;
}

}  // namespace

TEST_CASE("zero learning rate leaves the model unchanged") {
  std::mt19937_64 rng(9);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  const auto before = model.params().snapshot();
  LandmarkTrainConfig config;
  config.steps = 5;
  config.batch = 4;
  config.adam.lr = 0.0;
  train_speech2landmark(model, {make_clip(20, 1)}, config);
  for (const auto& [name, t] : model.params().snapshot()) {
    const nn::Tensor& orig = before.at(name);
    for (long i = 0; i < t.numel(); ++i) CHECK(t[i] == orig[i]);
  }
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  LandmarkTrainConfig config;
  config.steps = 10;
  config.batch = 4;
  config.adam.lr = 1e-3;
  config.seed = 77;
  std::vector<double> first;
  for (int run = 0; run < 2; ++run) {
    std::mt19937_64 rng(10);
    Speech2LandmarkModel model(small_basis(rng), tiny_config());
    const TrainHistory h = train_speech2landmark(model, {make_clip(20, 2)}, config);
    if (run == 0)
      first = h.total;
    else
      for (size_t i = 0; i < first.size(); ++i) CHECK(h.total[i] == first[i]);
  }
}

TEST_CASE("short overfit run drives the landmark loss down") {
  const LandmarkClip clip = make_clip(30, 3);
  PcaBasis basis = pca_fit(clip.targets, 0.99);
  Speech2LandmarkConfig mc;
  mc.conv_channels = {4, 8, 16, 16};
  mc.seed = 12;
  Speech2LandmarkModel model(basis, mc);
  LandmarkTrainConfig config;
  config.steps = 250;
  config.batch = 8;
  config.adam.lr = 2e-3;
  const TrainHistory h = train_speech2landmark(model, {clip}, config);
  const double head = h.lmark[0];
  double tail = 0.0;
  for (size_t i = h.lmark.size() - 10; i < h.lmark.size(); ++i) tail += h.lmark[i];
  tail /= 10.0;
  CHECK(tail < 0.05 * head);
}

TEST_CASE("checkpoint round trip preserves outputs") {
  std::mt19937_64 rng(13);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  const AudioFeatureWindow w = random_window(rng);
  const CanonicalDisplacement before = model.forward(w);
  const std::string path = "/tmp/tfg_s2l_ckpt.bin";
  model.save(path);
  const Speech2LandmarkModel loaded = Speech2LandmarkModel::load(path);
  const CanonicalDisplacement after = loaded.forward(w);
  CHECK((before.deltas - after.deltas).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training rejects an empty dataset") {
  std::mt19937_64 rng(14);
  Speech2LandmarkModel model(small_basis(rng), tiny_config());
  CHECK_THROWS_AS(train_speech2landmark(model, {}, LandmarkTrainConfig{}),
                  std::invalid_argument);
}
