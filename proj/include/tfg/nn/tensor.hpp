#pragma once

#include <random>
#include <string>
#include <vector>

namespace tfg::nn {

// Dense row-major ND array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape, double fill = 0.0);

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<long> shape, double v) {
    return Tensor(std::move(shape), v);
  }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  const std::vector<long>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  long dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long numel() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);
  double item() const;  // requires numel() == 1

  Tensor reshaped(std::vector<long> shape) const;

  std::string shape_str() const;

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

long shape_numel(const std::vector<long>& shape);

Tensor random_normal(std::vector<long> shape, std::mt19937_64& rng,
                     double mean = 0.0, double stddev = 1.0);
Tensor random_uniform(std::vector<long> shape, std::mt19937_64& rng, double lo,
                      double hi);

}  // namespace tfg::nn
