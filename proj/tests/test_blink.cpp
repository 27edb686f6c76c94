#include <random>

#include "doctest.h"
#include "tfg/blink.hpp"
#include "tfg/pca.hpp"
#include "tfg/synth.hpp"

using namespace tfg;

namespace {

BlinkSequence random_sequence(long t, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  BlinkSequence s;
  s.deltas.resize(t, kEyeDisplacementDim);
  for (long i = 0; i < t; ++i)
    for (long j = 0; j < kEyeDisplacementDim; ++j) s.deltas(i, j) = u(rng);
  return s;
}

BlinkSequence constant_sequence(long t, double value) {
  BlinkSequence s;
  s.deltas = Eigen::MatrixXd::Constant(t, kEyeDisplacementDim, value);
  return s;
}

// Brute-force triple-sum evaluation of the squared-MMD estimator.
double mmd_oracle(const std::vector<BlinkSequence>& real,
                  const std::vector<BlinkSequence>& fake, double sigma) {
  auto flat = [](const BlinkSequence& s) {
    std::vector<double> v;
    for (long i = 0; i < s.deltas.rows(); ++i)
      for (long j = 0; j < s.deltas.cols(); ++j) v.push_back(s.deltas(i, j));
    return v;
  };
  auto k = [sigma](const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-d2 / (2.0 * sigma));
  };
  const long n = static_cast<long>(real.size());
  const long m = static_cast<long>(fake.size());
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) t1 += k(flat(real[i]), flat(real[j]));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) t2 += k(flat(real[i]), flat(fake[j]));
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j) t3 += k(flat(fake[i]), flat(fake[j]));
  return t1 / (n * n) - 2.0 * t2 / (n * m) + t3 / (m * m);
}

PcaBasis eye_basis(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd dirs(3, kEyeDisplacementDim);
  for (long i = 0; i < dirs.size(); ++i) dirs(i / dirs.cols(), i % dirs.cols()) = n(rng);
  Eigen::MatrixXd samples(80, kEyeDisplacementDim);
  for (long i = 0; i < 80; ++i)
    samples.row(i) = n(rng) * dirs.row(0) + n(rng) * dirs.row(1) + n(rng) * dirs.row(2);
  return pca_fit_matrix(samples, 0.99);
}

}  // namespace

TEST_CASE("mmd of a batch with itself is zero") {
  std::mt19937_64 rng(1);
  std::vector<BlinkSequence> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_sequence(6, rng));
  CHECK(std::abs(mmd_loss(batch, batch, 1.7)) < 1e-9);
}

TEST_CASE("constant batches far apart approach the two-population limit") {
  const std::vector<BlinkSequence> real(4, constant_sequence(5, 0.0));
  const std::vector<BlinkSequence> fake(4, constant_sequence(5, 10.0));
  // Within-set kernels are 1; the cross term vanishes for a small sigma.
  CHECK(mmd_loss(real, fake, 0.05) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("mmd matches the brute-force triple sum on random batches") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<long> size_u(1, 8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BlinkSequence> real, fake;
    const long n = size_u(rng), m = size_u(rng);
    for (long i = 0; i < n; ++i) real.push_back(random_sequence(4, rng));
    for (long i = 0; i < m; ++i) fake.push_back(random_sequence(4, rng));
    const double sigma = 0.5 + 3.0 * static_cast<double>(trial) / 20.0;
    CHECK(std::abs(mmd_loss(real, fake, sigma) - mmd_oracle(real, fake, sigma)) <
          1e-9);
  }
}

TEST_CASE("mmd is symmetric under swapping real and fake") {
  std::mt19937_64 rng(3);
  std::vector<BlinkSequence> a, b;
  for (int i = 0; i < 4; ++i) a.push_back(random_sequence(5, rng));
  for (int i = 0; i < 6; ++i) b.push_back(random_sequence(5, rng));
  CHECK(mmd_loss(a, b, 2.0) == doctest::Approx(mmd_loss(b, a, 2.0)).epsilon(1e-12));
}

TEST_CASE("mmd input validation") {
  std::mt19937_64 rng(4);
  const std::vector<BlinkSequence> batch{random_sequence(5, rng)};
  CHECK_THROWS_AS(mmd_loss({}, batch, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(mmd_loss(batch, batch, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mmd_loss(batch, batch, -1.0), std::invalid_argument);
}

TEST_CASE("range regularizer basics and oracle") {
  std::mt19937_64 rng(5);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(kEyeDisplacementDim, -1.0);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(kEyeDisplacementDim, 1.0);

  CHECK(range_regularizer(random_sequence(6, rng, 0.99), lo, hi) == 0.0);

  BlinkSequence over = constant_sequence(3, 0.0);
  over.deltas(1, 7) = 3.0;  // exceeds hi by 2
  CHECK(range_regularizer(over, lo, hi) == doctest::Approx(4.0));

  const BlinkSequence s = random_sequence(8, rng, 2.5);
  double oracle = 0.0;
  for (long t = 0; t < s.deltas.rows(); ++t)
    for (long c = 0; c < s.deltas.cols(); ++c) {
      const double v = s.deltas(t, c);
      const double clamped = std::min(std::max(v, lo(c)), hi(c));
      oracle += (v - clamped) * (v - clamped);
    }
  CHECK(std::abs(range_regularizer(s, lo, hi) - oracle) < 1e-9);

  CHECK_THROWS_AS(range_regularizer(s, hi, lo), std::invalid_argument);
}

TEST_CASE("generation is seed-deterministic and seed-sensitive") {
  std::mt19937_64 rng(6);
  BlinkGenerator gen(eye_basis(rng), BlinkGeneratorConfig{});
  const BlinkSequence a = gen.generate(20, 42);
  const BlinkSequence b = gen.generate(20, 42);
  const BlinkSequence c = gen.generate(20, 43);
  CHECK((a.deltas - b.deltas).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.deltas - c.deltas).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.deltas.rows() == 20);
  CHECK(a.deltas.cols() == 44);
  CHECK_THROWS_AS(gen.generate(0, 1), std::invalid_argument);
}

TEST_CASE("impose_blinks adds only to eye-region landmarks") {
  std::mt19937_64 rng(7);
  const LandmarkSet base = synth::template_face();
  std::vector<LandmarkSet> frames(6, base);
  const BlinkSequence blinks = random_sequence(6, rng, 2.0);
  const auto out = impose_blinks(frames, blinks);

  const auto& region = eye_region_indices();
  for (size_t t = 0; t < out.size(); ++t)
    for (int i = 0; i < kNumLandmarks; ++i) {
      const bool in_region =
          std::find(region.begin(), region.end(), i) != region.end();
      const double moved = (out[t].points.row(i) - base.points.row(i)).norm();
      if (in_region)
        CHECK(moved > 0.0);
      else
        CHECK(moved == 0.0);
    }

  const BlinkSequence zero = constant_sequence(6, 0.0);
  const auto same = impose_blinks(frames, zero);
  for (size_t t = 0; t < same.size(); ++t)
    CHECK((same[t].points - base.points).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(impose_blinks(std::vector<LandmarkSet>(3, base), blinks),
                  std::invalid_argument);
}

TEST_CASE("constant open eyes give zero blinks") {
  const LandmarkSet base = synth::template_face();
  const std::vector<LandmarkSet> frames(30, base);
  const BlinkStats stats = detect_blinks(frames, 30.0);
  CHECK(stats.blink_count == 0);
  CHECK(stats.blink_rate == 0.0);
}

TEST_CASE("three constructed closures of 6 frames at 30 fps") {
  const LandmarkSet base = synth::template_face();
  // Square closure pulses: EAR dips fully below threshold for 6 frames.
  std::vector<LandmarkSet> frames(90, base);
  for (long start : {10L, 40L, 70L})
    for (long k = 0; k < 6; ++k) {
      LandmarkSet& lm = frames[static_cast<size_t>(start + k)];
      for (int i : {37, 38, 43, 44}) lm.points(i, 1) += 2.6;
      for (int i : {40, 41, 46, 47}) lm.points(i, 1) -= 2.6;
    }
  const BlinkStats stats = detect_blinks(frames, 30.0);
  CHECK(stats.blink_count == 3);
  CHECK(stats.mean_blink_duration == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(stats.blink_rate == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("synthesized pulse round-trips through the detector") {
  const LandmarkSet base = synth::template_face();
  const long target = 5;
  const long width = synth::calibrate_pulse_width(base, target);
  const BlinkSequence track = synth::blink_track(base, 60, {25}, width);
  const BlinkStats stats = detect_blinks_on_base(track, base, 25.0);
  CHECK(stats.blink_count == 1);
  CHECK(std::abs(stats.durations[0] - 0.2) <= 1.0 / 25.0 + 1e-9);
}

TEST_CASE("zero learning rate leaves the generator unchanged") {
  std::mt19937_64 rng(8);
  BlinkGenerator gen(eye_basis(rng), BlinkGeneratorConfig{10, 8, 3});
  const auto before = gen.params().snapshot();
  BlinkTrainConfig config;
  config.steps = 3;
  config.batch = 3;
  config.sequence_length = 10;
  config.adam.lr = 0.0;
  std::vector<BlinkSequence> data;
  for (int i = 0; i < 4; ++i) data.push_back(random_sequence(12, rng));
  train_blink(gen, data, config);
  for (const auto& [name, t] : gen.params().snapshot()) {
    const nn::Tensor& orig = before.at(name);
    for (long i = 0; i < t.numel(); ++i) CHECK(t[i] == orig[i]);
  }
}

TEST_CASE("a short MMD run moves the generator toward the data") {
  std::mt19937_64 rng(9);
  const LandmarkSet base = synth::template_face();
  // Small synthetic corpus of single-pulse sequences.
  std::vector<BlinkSequence> data;
  std::uniform_int_distribution<long> start_u(2, 20);
  for (int i = 0; i < 24; ++i)
    data.push_back(synth::blink_track(base, 30, {start_u(rng)}, 8));

  const Eigen::MatrixXd samples = [&] {
    Eigen::MatrixXd all(data.size() * 30, kEyeDisplacementDim);
    long r = 0;
    for (const auto& s : data)
      for (long t = 0; t < 30; ++t) all.row(r++) = s.deltas.row(t);
    return all;
  }();
  BlinkGenerator gen(pca_fit_matrix(samples, 0.99), BlinkGeneratorConfig{10, 16, 4});

  BlinkTrainConfig config;
  config.steps = 60;
  config.batch = 8;
  config.sequence_length = 30;
  config.adam.lr = 2e-3;
  config.seed = 5;

  auto held_out_mmd = [&] {
    std::vector<BlinkSequence> fake;
    for (int i = 0; i < 8; ++i) fake.push_back(gen.generate(30, 1000 + i));
    std::vector<BlinkSequence> real(data.begin(), data.begin() + 8);
    return mmd_loss(real, fake, 25.0);
  };
  const double before = held_out_mmd();
  const BlinkTrainResult result = train_blink(gen, data, config);
  const double after = held_out_mmd();
  CHECK(after < before);
  CHECK(result.loss_history.size() == 60);
  CHECK((result.hi - result.lo).minCoeff() >= 0.0);
}

TEST_CASE("generator checkpoint round trip") {
  std::mt19937_64 rng(10);
  BlinkGenerator gen(eye_basis(rng), BlinkGeneratorConfig{10, 8, 3});
  const std::string path = "/tmp/tfg_blink_ckpt.bin";
  gen.save(path);
  const BlinkGenerator loaded = BlinkGenerator::load(path);
  const BlinkSequence a = gen.generate(12, 9);
  const BlinkSequence b = loaded.generate(12, 9);
  CHECK((a.deltas - b.deltas).cwiseAbs().maxCoeff() == 0.0);
}
