#pragma once

#include <vector>

#include "tfg/nn/autodiff.hpp"

namespace tfg::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions opts);

  void zero_grad();
  void step();
  const AdamOptions& options() const { return opts_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions opts_;
  long t_ = 0;
};

}  // namespace tfg::nn
