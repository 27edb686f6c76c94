#include "tfg/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace tfg::nn {

Var ParamStore::add(const std::string& name, Tensor init) {
  for (const auto& [n, v] : entries_)
    if (n == name) throw std::logic_error("ParamStore: duplicate name " + name);
  Var p = parameter(std::move(init));
  entries_.emplace_back(name, p);
  return p;
}

Var ParamStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw std::logic_error("ParamStore: unknown name " + name);
}

std::vector<Var> ParamStore::vars() const {
  std::vector<Var> out;
  out.reserve(entries_.size());
  for (const auto& [n, v] : entries_) out.push_back(v);
  return out;
}

long ParamStore::total_params() const {
  long n = 0;
  for (const auto& [name, v] : entries_) n += v->value.numel();
  return n;
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [n, v] : entries_) out[n] = v->value;
  return out;
}

void ParamStore::restore(const std::map<std::string, Tensor>& tensors) {
  for (auto& [n, v] : entries_) {
    auto it = tensors.find(n);
    if (it == tensors.end())
      throw std::runtime_error("ParamStore::restore: missing tensor " + n);
    if (!it->second.same_shape(v->value))
      throw std::runtime_error("ParamStore::restore: shape mismatch for " + n);
    v->value = it->second;
  }
}

namespace {

Tensor fan_in_uniform(std::vector<long> shape, long fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return random_uniform(std::move(shape), rng, -s, s);
}

}  // namespace

LinearLayer::LinearLayer(ParamStore& store, const std::string& prefix, long in,
                         long out, std::mt19937_64& rng) {
  w = store.add(prefix + ".w", fan_in_uniform({out, in}, in, rng));
  b = store.add(prefix + ".b", Tensor::zeros({out}));
}

Conv2dLayer::Conv2dLayer(ParamStore& store, const std::string& prefix, long in_ch,
                         long out_ch, int kernel, int stride_, int pad_,
                         std::mt19937_64& rng)
    : stride(stride_), pad(pad_) {
  w = store.add(prefix + ".w",
                fan_in_uniform({out_ch, in_ch, kernel, kernel},
                               in_ch * kernel * kernel, rng));
  b = store.add(prefix + ".b", Tensor::zeros({out_ch}));
}

InstanceNorm2dLayer::InstanceNorm2dLayer(ParamStore& store, const std::string& prefix,
                                         long channels) {
  gamma = store.add(prefix + ".gamma", Tensor::full({channels}, 1.0));
  beta = store.add(prefix + ".beta", Tensor::zeros({channels}));
}

GruLayer::GruLayer(ParamStore& store, const std::string& prefix, long input,
                   long hidden_, std::mt19937_64& rng)
    : update_x(store, prefix + ".zx", input, hidden_, rng),
      update_h(store, prefix + ".zh", hidden_, hidden_, rng),
      reset_x(store, prefix + ".rx", input, hidden_, rng),
      reset_h(store, prefix + ".rh", hidden_, hidden_, rng),
      cand_x(store, prefix + ".hx", input, hidden_, rng),
      cand_h(store, prefix + ".hh", hidden_, hidden_, rng),
      hidden(hidden_) {}

Var GruLayer::step(const Var& x, const Var& h) const {
  Var z = sigmoid(add(update_x.forward(x), update_h.forward(h)));
  Var r = sigmoid(add(reset_x.forward(x), reset_h.forward(h)));
  Var cand = tanh_op(add(cand_x.forward(x), cand_h.forward(mul(r, h))));
  // h' = (1 - z) * h + z * cand
  return add(mul(affine(z, -1.0, 1.0), h), mul(z, cand));
}

Var GruLayer::initial_state(long batch) const {
  return constant(Tensor::zeros({batch, hidden}));
}

}  // namespace tfg::nn
