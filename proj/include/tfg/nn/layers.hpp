#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "tfg/nn/autodiff.hpp"

namespace tfg::nn {

// Named registry of trainable parameters. Models register layer parameters
// here; checkpoints snapshot/restore by name.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);
  Var find(const std::string& name) const;
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<Var> vars() const;
  long total_params() const;
  std::map<std::string, Tensor> snapshot() const;
  void restore(const std::map<std::string, Tensor>& tensors);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

struct LinearLayer {
  Var w;  // [out, in]
  Var b;  // [out]
  LinearLayer() = default;
  LinearLayer(ParamStore& store, const std::string& prefix, long in, long out,
              std::mt19937_64& rng);
  Var forward(const Var& x) const { return linear(x, w, b); }
};

struct Conv2dLayer {
  Var w;  // [out, in, k, k]
  Var b;  // [out]
  int stride = 1;
  int pad = 0;
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& store, const std::string& prefix, long in_ch, long out_ch,
              int kernel, int stride, int pad, std::mt19937_64& rng);
  Var forward(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct InstanceNorm2dLayer {
  Var gamma;  // [C]
  Var beta;   // [C]
  InstanceNorm2dLayer() = default;
  InstanceNorm2dLayer(ParamStore& store, const std::string& prefix, long channels);
  Var forward(const Var& x) const { return instance_norm(x, gamma, beta); }
};

// Single gated recurrent cell. State and input are [B, dim] rows.
struct GruLayer {
  LinearLayer update_x, update_h;  // z gate
  LinearLayer reset_x, reset_h;    // r gate
  LinearLayer cand_x, cand_h;      // candidate state
  long hidden = 0;
  GruLayer() = default;
  GruLayer(ParamStore& store, const std::string& prefix, long input, long hidden,
           std::mt19937_64& rng);
  Var step(const Var& x, const Var& h) const;
  Var initial_state(long batch) const;
};

}  // namespace tfg::nn
