#include "tfg/pca.hpp"

#include <stdexcept>

namespace tfg {

PcaBasis pca_fit_matrix(const Eigen::MatrixXd& samples, double variance_target) {
  const long n = samples.rows();
  const long d = samples.cols();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
  if (variance_target <= 0.0 || variance_target > 1.0)
    throw std::invalid_argument("pca_fit: variance_target must be in (0,1]");
  if (!samples.allFinite()) throw std::invalid_argument("pca_fit: non-finite samples");

  PcaBasis basis;
  basis.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - basis.mean.transpose();

  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("pca_fit: eigendecomposition failed");

  // Eigenvalues ascend; walk from the largest down to the target.
  const Eigen::VectorXd evals = eig.eigenvalues().cwiseMax(0.0);
  const double total = evals.sum();
  if (total <= 0.0)
    throw std::invalid_argument("pca_fit: samples have zero variance");

  long k = 0;
  double captured = 0.0;
  for (long i = 0; i < d; ++i) {
    captured += evals(d - 1 - i);
    ++k;
    if (captured / total >= variance_target - 1e-12) break;
  }

  basis.components.resize(k, d);
  basis.explained_variance_ratio.resize(k);
  for (long i = 0; i < k; ++i) {
    basis.components.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();
    basis.explained_variance_ratio(i) = evals(d - 1 - i) / total;
  }
  return basis;
}

}  // namespace tfg
