#include <random>

#include "doctest.h"
#include "tfg/pca.hpp"
#include "tfg/speech2landmark.hpp"

using namespace tfg;

TEST_CASE("rank-1 data needs a single component aligned with the direction") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(10);
  dir(3) = 0.6;
  dir(7) = 0.8;
  Eigen::MatrixXd samples(40, 10);
  for (long i = 0; i < 40; ++i) samples.row(i) = (2.0 + n(rng)) * dir.transpose();
  const PcaBasis basis = pca_fit_matrix(samples, 0.99);
  CHECK(basis.num_components() == 1);
  CHECK(std::abs(std::abs(basis.components.row(0).dot(dir.transpose())) - 1.0) < 1e-9);
}

TEST_CASE("components are orthonormal and capture the variance target") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd samples(200, 30);
  for (long i = 0; i < 200; ++i) {
    for (long j = 0; j < 30; ++j)
      samples(i, j) = n(rng) / (1.0 + static_cast<double>(j));
  }
  const PcaBasis basis = pca_fit_matrix(samples, 0.99);
  const Eigen::MatrixXd gram = basis.components * basis.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(basis.num_components(),
                                          basis.num_components()))
            .cwiseAbs()
            .maxCoeff() < 1e-6);
  CHECK(basis.explained_variance_ratio.sum() >= 0.99);
}

TEST_CASE("reconstruction error is bounded by the residual variance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd samples(150, 20);
  for (long i = 0; i < 150; ++i)
    for (long j = 0; j < 20; ++j) samples(i, j) = n(rng) * (j < 4 ? 3.0 : 0.05);
  const PcaBasis basis = pca_fit_matrix(samples, 0.99);

  // Project-and-reconstruct oracle: mean squared residual over the training
  // data is at most (1 - 0.99) of the total variance.
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  const double total_var =
      centered.squaredNorm() / static_cast<double>(samples.rows() - 1);
  double residual = 0.0;
  for (long i = 0; i < samples.rows(); ++i) {
    const Eigen::VectorXd x = samples.row(i).transpose();
    residual += (x - basis.reconstruct(basis.project(x))).squaredNorm();
  }
  residual /= static_cast<double>(samples.rows() - 1);
  CHECK(residual <= (1.0 - 0.99) * total_var + 1e-9);
}

TEST_CASE("isotropic data with target 1.0 needs the full rank") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const long d = 12;
  Eigen::MatrixXd samples(400, d);
  for (long i = 0; i < 400; ++i)
    for (long j = 0; j < d; ++j) samples(i, j) = n(rng);
  const PcaBasis basis = pca_fit_matrix(samples, 1.0);
  CHECK(basis.num_components() == d);
}

TEST_CASE("displacement wrapper lays out 136 columns and validates input") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<CanonicalDisplacement> data(50);
  for (auto& d : data)
    for (int i = 0; i < kNumLandmarks; ++i) d.deltas.row(i) << n(rng), n(rng);
  const PcaBasis basis = pca_fit(data, 0.99);
  CHECK(basis.dim() == kDisplacementDim);
  CHECK(basis.explained_variance_ratio.sum() >= 0.99);
  CHECK_THROWS_AS(pca_fit({data[0]}, 0.99), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(data, 0.0), std::invalid_argument);
}

TEST_CASE("full-variance fit on isotropic displacements reaches 136 components") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<CanonicalDisplacement> data(300);
  for (auto& d : data)
    for (int i = 0; i < kNumLandmarks; ++i) d.deltas.row(i) << n(rng), n(rng);
  const PcaBasis basis = pca_fit(data, 1.0);
  CHECK(basis.num_components() == 136);
}
