#include "tfg/nn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tfg::nn {

long shape_numel(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<long> shape, double fill)
    : shape_(std::move(shape)),
      data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("Tensor::item: not a scalar");
  return data_[0];
}

Tensor Tensor::reshaped(std::vector<long> shape) const {
  if (shape_numel(shape) != numel())
    throw std::invalid_argument("Tensor::reshaped: element count mismatch");
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

std::string Tensor::shape_str() const {
  std::ostringstream ss;
  ss << "[";
  for (size_t i = 0; i < shape_.size(); ++i) ss << (i ? "," : "") << shape_[i];
  ss << "]";
  return ss.str();
}

Tensor random_normal(std::vector<long> shape, std::mt19937_64& rng, double mean,
                     double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(mean, stddev);
  for (long i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

Tensor random_uniform(std::vector<long> shape, std::mt19937_64& rng, double lo,
                      double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (long i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace tfg::nn
