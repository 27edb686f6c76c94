#include <cmath>
#include <random>

#include "doctest.h"
#include "tfg/nn/autodiff.hpp"
#include "tfg/nn/layers.hpp"
#include "tfg/nn/optim.hpp"

using namespace tfg::nn;

namespace {

Tensor rand_tensor(std::vector<long> shape, std::mt19937_64& rng, double lo = -1.0,
                   double hi = 1.0) {
  return random_uniform(std::move(shape), rng, lo, hi);
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  std::mt19937_64 rng(1);
  Var a = parameter(rand_tensor({3, 4}, rng));
  Var b = parameter(rand_tensor({3, 4}, rng));
  auto loss = [&] {
    Var x = add(mul(a, b), affine(sub(a, b), 0.7, 0.1));
    x = add(square(x), mul(sigmoid(a), tanh_op(b)));
    x = add(x, exp_op(affine(a, 0.3, -0.2)));
    x = add(x, abs_op(b));
    x = add(x, leaky_relu(a, 0.2));
    x = add(x, relu(b));
    return mean(x);
  };
  CHECK(gradcheck_max_rel_error(loss, {a, b}) < 1e-6);
}

TEST_CASE("reductions and norms match finite differences") {
  std::mt19937_64 rng(2);
  Var a = parameter(rand_tensor({4, 5}, rng, 0.2, 1.5));
  Tensor w = rand_tensor({4, 5}, rng, 0.1, 2.0);
  auto loss = [&] {
    Var t = add(sum(square(a)), weighted_sum(a, w));
    t = add(t, l2_norm(a));
    t = add(t, l2_norm_rows(a, 4));
    return t;
  };
  CHECK(gradcheck_max_rel_error(loss, {a}) < 1e-6);
}

TEST_CASE("matmul and linear match finite differences") {
  std::mt19937_64 rng(3);
  Var a = parameter(rand_tensor({3, 4}, rng));
  Var b = parameter(rand_tensor({4, 2}, rng));
  Var w = parameter(rand_tensor({5, 4}, rng));
  Var bias = parameter(rand_tensor({5}, rng));
  Var x = constant(rand_tensor({3, 4}, rng));
  auto loss = [&] {
    return add(mean(square(matmul(a, b))), mean(square(linear(x, w, bias))));
  };
  CHECK(gradcheck_max_rel_error(loss, {a, b, w, bias}) < 1e-6);
}

TEST_CASE("conv2d forward matches a naive convolution") {
  std::mt19937_64 rng(4);
  const long B = 2, C = 3, H = 6, W = 7, O = 4, K = 3;
  const int stride = 2, pad = 1;
  Tensor x = rand_tensor({B, C, H, W}, rng);
  Tensor w = rand_tensor({O, C, K, K}, rng);
  Tensor b = rand_tensor({O}, rng);
  Var out = conv2d(constant(x), constant(w), constant(b), stride, pad);

  const long OH = (H + 2 * pad - K) / stride + 1;
  const long OW = (W + 2 * pad - K) / stride + 1;
  REQUIRE(out->value.shape() == std::vector<long>({B, O, OH, OW}));
  for (long n = 0; n < B; ++n)
    for (long o = 0; o < O; ++o)
      for (long oy = 0; oy < OH; ++oy)
        for (long ox = 0; ox < OW; ++ox) {
          double acc = b[o];
          for (long c = 0; c < C; ++c)
            for (long ky = 0; ky < K; ++ky)
              for (long kx = 0; kx < K; ++kx) {
                const long iy = oy * stride - pad + ky;
                const long ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((n * C + c) * H + iy) * W + ix] *
                       w[((o * C + c) * K + ky) * K + kx];
              }
          const double got = out->value[((n * O + o) * OH + oy) * OW + ox];
          CHECK(got == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937_64 rng(5);
  Var x = parameter(rand_tensor({2, 2, 5, 5}, rng));
  Var w = parameter(rand_tensor({3, 2, 3, 3}, rng));
  Var b = parameter(rand_tensor({3}, rng));
  auto loss = [&] { return mean(square(conv2d(x, w, b, 2, 1))); };
  CHECK(gradcheck_max_rel_error(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("upsample, concat and reshape gradients") {
  std::mt19937_64 rng(6);
  Var a = parameter(rand_tensor({2, 2, 3, 3}, rng));
  Var b = parameter(rand_tensor({2, 1, 6, 6}, rng));
  Var c = parameter(rand_tensor({2, 4}, rng));
  Var d = parameter(rand_tensor({2, 3}, rng));
  auto loss = [&] {
    Var up = upsample_nearest2(a);
    Var cat = concat_channels(up, b);
    Var flat = reshape(cat, {2, 3 * 36});
    return add(mean(square(flat)), sum(square(concat_cols({c, d}))));
  };
  CHECK(gradcheck_max_rel_error(loss, {a, b, c, d}) < 1e-6);
}

TEST_CASE("instance_norm normalizes per sample and channel") {
  std::mt19937_64 rng(7);
  Tensor x = rand_tensor({2, 3, 4, 4}, rng, -2.0, 5.0);
  Var out = instance_norm(constant(x), constant(Tensor::full({3}, 1.0)),
                          constant(Tensor::zeros({3})));
  for (long n = 0; n < 2; ++n)
    for (long c = 0; c < 3; ++c) {
      double mean_v = 0.0, var_v = 0.0;
      for (long i = 0; i < 16; ++i) mean_v += out->value[(n * 3 + c) * 16 + i];
      mean_v /= 16.0;
      for (long i = 0; i < 16; ++i) {
        const double d = out->value[(n * 3 + c) * 16 + i] - mean_v;
        var_v += d * d;
      }
      var_v /= 16.0;
      CHECK(std::abs(mean_v) < 1e-9);
      CHECK(var_v == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("instance_norm gradients match finite differences") {
  std::mt19937_64 rng(8);
  Var x = parameter(rand_tensor({2, 2, 3, 3}, rng));
  Var gamma = parameter(rand_tensor({2}, rng, 0.5, 1.5));
  Var beta = parameter(rand_tensor({2}, rng));
  Tensor w = rand_tensor({2, 2, 3, 3}, rng);
  auto loss = [&] { return weighted_sum(instance_norm(x, gamma, beta), w); };
  CHECK(gradcheck_max_rel_error(loss, {x, gamma, beta}, 1e-6) < 1e-4);
}

TEST_CASE("pairwise_sqdist matches direct loops and differentiates") {
  std::mt19937_64 rng(9);
  Tensor a = rand_tensor({3, 5}, rng);
  Tensor b = rand_tensor({4, 5}, rng);
  Var d = pairwise_sqdist(constant(a), constant(b));
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 4; ++j) {
      double s = 0.0;
      for (long k = 0; k < 5; ++k) {
        const double diff = a[i * 5 + k] - b[j * 5 + k];
        s += diff * diff;
      }
      CHECK(d->value[i * 4 + j] == doctest::Approx(s).epsilon(1e-12));
    }
  Var pa = parameter(a);
  Var pb = parameter(b);
  auto loss = [&] { return mean(exp_op(affine(pairwise_sqdist(pa, pb), -0.5, 0.0))); };
  CHECK(gradcheck_max_rel_error(loss, {pa, pb}) < 1e-6);
}

TEST_CASE("gradient accumulates across shared subexpressions") {
  Var a = parameter(Tensor::full({1}, 2.0));
  Var shared = mul(a, a);             // a^2
  Var out = add(shared, shared);      // 2 a^2, d/da = 4a = 8
  backward(out);
  CHECK(a->grad[0] == doctest::Approx(8.0));
}

TEST_CASE("GRU step backpropagates through time") {
  std::mt19937_64 rng(10);
  ParamStore store;
  GruLayer gru(store, "gru", 3, 4, rng);
  Tensor noise = rand_tensor({2, 3 * 5}, rng);
  auto loss = [&] {
    Var h = gru.initial_state(2);
    for (int t = 0; t < 5; ++t) {
      Tensor step({2, 3});
      for (long i = 0; i < 2; ++i)
        for (long j = 0; j < 3; ++j) step[i * 3 + j] = noise[i * 15 + t * 3 + j];
      h = gru.step(constant(step), h);
    }
    return mean(square(h));
  };
  CHECK(gradcheck_max_rel_error(loss, store.vars()) < 1e-5);
}

TEST_CASE("Adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(11);
  Var a = parameter(rand_tensor({4}, rng));
  const Tensor before = a->value;
  Adam opt({a}, AdamOptions{0.0, 0.5, 0.999, 1e-8});
  for (int i = 0; i < 3; ++i) {
    opt.zero_grad();
    backward(sum(square(a)));
    opt.step();
  }
  for (long i = 0; i < 4; ++i) CHECK(a->value[i] == before[i]);
}

TEST_CASE("Adam descends on a quadratic") {
  std::mt19937_64 rng(12);
  Var a = parameter(rand_tensor({6}, rng, 2.0, 3.0));
  Adam opt({a}, AdamOptions{0.05, 0.9, 0.999, 1e-8});
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    Var loss = sum(square(a));
    backward(loss);
    opt.step();
    if (i == 0) first = loss->value.item();
    last = loss->value.item();
  }
  CHECK(last < 0.01 * first);
}

TEST_CASE("backward requires a scalar root") {
  Var a = parameter(Tensor::full({2, 2}, 1.0));
  CHECK_THROWS_AS(backward(square(a)), std::logic_error);
}
