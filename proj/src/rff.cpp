#include "bgrl/rff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bgrl/error.hpp"
#include "bgrl/rng.hpp"

namespace bgrl {

FeatureMap::FeatureMap(int input_dim, int num_features, double bandwidth,
                       std::uint64_t seed)
    : bandwidth_(bandwidth) {
  require(input_dim >= 1, "FeatureMap: input_dim must be >= 1");
  require(num_features >= 1, "FeatureMap: num_features must be >= 1");
  require(bandwidth > 0.0 && std::isfinite(bandwidth),
          "FeatureMap: bandwidth must be positive");
  Rng rng(seed);
  projection_.resize(num_features, input_dim);
  phases_.resize(num_features);
  // row-major fill so the stream order does not depend on Eigen's layout
  for (int i = 0; i < num_features; ++i) {
    for (int j = 0; j < input_dim; ++j) {
      projection_(i, j) = rng.normal() / bandwidth;
    }
  }
  for (int i = 0; i < num_features; ++i) {
    phases_[i] = 2.0 * std::numbers::pi * rng.uniform();
  }
  scale_ = std::sqrt(2.0 / num_features);
}

FeatureMap::FeatureMap(Eigen::MatrixXd projection, Eigen::VectorXd phases,
                       double bandwidth)
    : projection_(std::move(projection)),
      phases_(std::move(phases)),
      bandwidth_(bandwidth) {
  require(projection_.rows() >= 1 && projection_.cols() >= 1,
          "FeatureMap: empty projection");
  require_dim(phases_.size() == projection_.rows(),
              "FeatureMap: phases length must equal number of features");
  require(bandwidth > 0.0, "FeatureMap: bandwidth must be positive");
  scale_ = std::sqrt(2.0 / static_cast<double>(projection_.rows()));
}

void FeatureMap::check_input(const Eigen::VectorXd& z) const {
  if (z.size() != projection_.cols()) {
    throw DimensionError("FeatureMap: expected input of dimension " +
                         std::to_string(projection_.cols()) + ", got " +
                         std::to_string(z.size()));
  }
}

Eigen::VectorXd FeatureMap::eval(const Eigen::VectorXd& z) const {
  check_input(z);
  return scale_ * (projection_ * z + phases_).array().cos().matrix();
}

Eigen::MatrixXd FeatureMap::jacobian(const Eigen::VectorXd& z) const {
  check_input(z);
  const Eigen::ArrayXd s = -scale_ * (projection_ * z + phases_).array().sin();
  return s.matrix().asDiagonal() * projection_;
}

Eigen::VectorXd FeatureMap::gradient_of(const Eigen::VectorXd& p,
                                        const Eigen::VectorXd& z) const {
  check_input(z);
  require_dim(p.size() == projection_.rows(),
              "FeatureMap: coefficient length mismatch");
  const Eigen::ArrayXd s = -scale_ * (projection_ * z + phases_).array().sin();
  return projection_.transpose() * (s * p.array()).matrix();
}

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       double bandwidth) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

}  // namespace bgrl
