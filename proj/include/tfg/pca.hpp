#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tfg {

// Truncated principal-component basis with orthonormal component rows.
struct PcaBasis {
  Eigen::MatrixXd components;              // K x D, orthonormal rows
  Eigen::VectorXd mean;                    // D
  Eigen::VectorXd explained_variance_ratio;  // K

  long num_components() const { return components.rows(); }
  long dim() const { return components.cols(); }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    return components * (x - mean);
  }
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& coeffs) const {
    return components.transpose() * coeffs + mean;
  }
};

// Fits the smallest basis whose cumulative explained variance reaches
// `variance_target` over the sample rows (one sample per row).
PcaBasis pca_fit_matrix(const Eigen::MatrixXd& samples, double variance_target);

}  // namespace tfg
