#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace bgrl {

// Random Fourier features for the Gaussian kernel
//   k(x, y) = exp(-|x - y|^2 / (2 sigma^2)),
// phi(z) = sqrt(2/m) cos(G z + b) with G_ij ~ N(0, 1/sigma^2) and
// b_i ~ U[0, 2 pi). <phi(x), phi(y)> is an unbiased estimate of k(x, y).
//
// Immutable once built; share freely between threads.
class FeatureMap {
 public:
  FeatureMap(int input_dim, int num_features, double bandwidth,
             std::uint64_t seed);

  // Explicit parameters, mainly for tests. `projection` is used as-is
  // (already scaled by 1/bandwidth).
  FeatureMap(Eigen::MatrixXd projection, Eigen::VectorXd phases,
             double bandwidth);

  int input_dim() const { return static_cast<int>(projection_.cols()); }
  int num_features() const { return static_cast<int>(projection_.rows()); }
  double bandwidth() const { return bandwidth_; }
  const Eigen::MatrixXd& projection() const { return projection_; }
  const Eigen::VectorXd& phases() const { return phases_; }

  Eigen::VectorXd eval(const Eigen::VectorXd& z) const;

  // Jacobian d phi / d z, num_features x input_dim.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const;

  // Gradient of z -> <p, phi(z)>.
  Eigen::VectorXd gradient_of(const Eigen::VectorXd& p,
                              const Eigen::VectorXd& z) const;

 private:
  void check_input(const Eigen::VectorXd& z) const;

  Eigen::MatrixXd projection_;
  Eigen::VectorXd phases_;
  double bandwidth_;
  double scale_;
};

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       double bandwidth);

}  // namespace bgrl
