#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tfg/nn/tensor.hpp"

namespace tfg::nn {

// Reverse-mode autodiff over a dynamically built tape. Each op returns a new
// node holding its value; backward closures accumulate into parent grads.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor v);
Var parameter(Tensor v);

// Runs reverse-mode accumulation from a scalar root. Grads of parameters
// accumulate across calls until zeroed.
void backward(const Var& root);

void zero_grad(const std::vector<Var>& params);

// ---- elementwise and scalar ops ----
Var add(const Var& a, const Var& b);       // same shape
Var sub(const Var& a, const Var& b);       // same shape
Var mul(const Var& a, const Var& b);       // same shape
Var affine(const Var& x, double a, double b);  // a*x + b
Var neg(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);
Var tanh_op(const Var& x);
Var exp_op(const Var& x);
Var abs_op(const Var& x);
Var square(const Var& x);

// ---- reductions ----
Var sum(const Var& x);           // -> scalar
Var mean(const Var& x);          // -> scalar
Var weighted_sum(const Var& x, Tensor weights);  // sum(w*x) -> scalar
// sqrt(sum(x^2)); subgradient 0 at exactly zero input
Var l2_norm(const Var& x);
// treats x as [rows, rest] and returns the sum of per-row L2 norms
Var l2_norm_rows(const Var& x, long rows);

// ---- shape ops ----
Var reshape(const Var& x, std::vector<long> shape);
// concat along dim 1 of 2-D tensors [B, d_i] -> [B, sum d_i]
Var concat_cols(const std::vector<Var>& xs);
// concat along channel dim of [B,C,H,W] tensors
Var concat_channels(const Var& a, const Var& b);

// ---- linear algebra / network ops ----
Var matmul(const Var& a, const Var& b);              // [m,k]x[k,n]
Var linear(const Var& x, const Var& w, const Var& b);  // x[B,in] w[out,in] b[out]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var upsample_nearest2(const Var& x);                 // [B,C,H,W] -> [B,C,2H,2W]
Var instance_norm(const Var& x, const Var& gamma, const Var& beta,
                  double eps = 1e-5);
// squared Euclidean distances between rows: a[N,d], b[M,d] -> [N,M]
Var pairwise_sqdist(const Var& a, const Var& b);

// Central-difference gradient check: rebuilds the graph via `make_loss` for
// each perturbed coordinate and returns the maximum relative error over all
// parameter coordinates.
double gradcheck_max_rel_error(const std::function<Var()>& make_loss,
                               const std::vector<Var>& params,
                               double eps = 1e-5);

}  // namespace tfg::nn
