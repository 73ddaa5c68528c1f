#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bgrl/error.hpp"
#include "bgrl/rff.hpp"
#include "bgrl/rng.hpp"

using bgrl::FeatureMap;

TEST_CASE("shape and phase range") {
  const FeatureMap map(2, 100, 0.1, 7);
  CHECK(map.projection().rows() == 100);
  CHECK(map.projection().cols() == 2);
  CHECK(map.phases().size() == 100);
  CHECK(map.phases().minCoeff() >= 0.0);
  CHECK(map.phases().maxCoeff() < 2.0 * std::numbers::pi);
}

TEST_CASE("single feature is bounded by sqrt 2") {
  const FeatureMap map(1, 1, 1.0, 0);
  bgrl::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double v = map.eval(Eigen::VectorXd::Constant(1, 10.0 * rng.normal()))[0];
    CHECK(std::abs(v) <= std::sqrt(2.0) + 1e-15);
  }
}

TEST_CASE("projection entries have standard deviation 1/sigma") {
  const FeatureMap map(4, 4096, 0.5, 1);
  const Eigen::ArrayXd g = map.projection().reshaped().array();
  const double mean = g.mean();
  const double sd = std::sqrt((g - mean).square().sum() / static_cast<double>(g.size() - 1));
  CHECK(sd == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("zero argument gives sqrt(2/m) in every entry") {
  const int m = 16;
  const FeatureMap map(Eigen::MatrixXd::Zero(m, 3), Eigen::VectorXd::Zero(m), 1.0);
  const Eigen::VectorXd phi = map.eval(Eigen::Vector3d(0.3, -1.0, 2.0));
  for (int i = 0; i < m; ++i) CHECK(phi[i] == doctest::Approx(std::sqrt(2.0 / m)));
}

TEST_CASE("entries match the closed form") {
  const FeatureMap map(3, 40, 0.7, 9);
  const Eigen::Vector3d z(0.2, -0.4, 1.1);
  const Eigen::VectorXd phi = map.eval(z);
  for (int i = 0; i < 40; ++i) {
    double arg = map.phases()[i];
    for (int j = 0; j < 3; ++j) arg += map.projection()(i, j) * z[j];
    CHECK(phi[i] == doctest::Approx(std::sqrt(2.0 / 40) * std::cos(arg)).epsilon(1e-14));
  }
}

TEST_CASE("squared norm lies in [0, 2]") {
  bgrl::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const FeatureMap map(3, 1 + static_cast<int>(rng.index(64)), 0.5 + rng.uniform(), rng.next_u64());
    const Eigen::VectorXd phi = map.eval(rng.normal_vector(3));
    CHECK(phi.squaredNorm() >= 0.0);
    CHECK(phi.squaredNorm() <= 2.0 + 1e-12);
  }
}

TEST_CASE("kernel estimate at a nearby pair") {
  const FeatureMap map(2, 8192, 1.0, 21);
  const Eigen::Vector2d x(0.0, 0.0);
  const Eigen::Vector2d y(0.1, 0.0);
  const double approx = map.eval(x).dot(map.eval(y));
  CHECK(std::abs(approx - std::exp(-0.005)) <= 0.03);
  CHECK(bgrl::gaussian_kernel(x, y, 1.0) == doctest::Approx(std::exp(-0.005)));
}

TEST_CASE("mean kernel error over random pairs is within 5/sqrt(m)") {
  const int m = 8192;
  for (int d : {1, 3}) {
    const double sigma = 0.8;
    const FeatureMap map(d, m, sigma, 100 + d);
    bgrl::Rng rng(d);
    double err = 0.0;
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd x(d);
      Eigen::VectorXd y(d);
      for (int j = 0; j < d; ++j) {
        x[j] = 2.0 * rng.uniform() - 1.0;
        y[j] = 2.0 * rng.uniform() - 1.0;
      }
      const double exact = std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
      err += std::abs(map.eval(x).dot(map.eval(y)) - exact);
    }
    CHECK(err / 100.0 <= 5.0 / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("equal arguments give bitwise-equal maps") {
  const FeatureMap a(3, 50, 0.3, 77);
  const FeatureMap b(3, 50, 0.3, 77);
  const Eigen::Vector3d z(1.0, 2.0, -0.5);
  CHECK(a.projection() == b.projection());
  CHECK(a.phases() == b.phases());
  CHECK(a.eval(z) == b.eval(z));
  const FeatureMap c(3, 50, 0.3, 78);
  CHECK(c.projection() != a.projection());
}

TEST_CASE("test functions are bounded by |p| sqrt 2") {
  bgrl::Rng rng(8);
  const FeatureMap map(2, 64, 1.0, 4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd p = 3.0 * rng.normal_vector(64);
    const double lam = p.dot(map.eval(5.0 * rng.normal_vector(2)));
    CHECK(std::abs(lam) <= p.norm() * std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("jacobian and gradient match finite differences") {
  const FeatureMap map(3, 30, 0.9, 12);
  bgrl::Rng rng(2);
  const Eigen::VectorXd z = rng.normal_vector(3);
  const Eigen::VectorXd p = rng.normal_vector(30);
  const Eigen::MatrixXd jac = map.jacobian(z);
  const Eigen::VectorXd grad = map.gradient_of(p, z);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd zp = z;
    Eigen::VectorXd zm = z;
    zp[j] += h;
    zm[j] -= h;
    const Eigen::VectorXd col = (map.eval(zp) - map.eval(zm)) / (2.0 * h);
    CHECK((jac.col(j) - col).norm() <= 1e-7);
    CHECK(grad[j] == doctest::Approx(p.dot(col)).epsilon(1e-6));
  }
}

TEST_CASE("invalid construction and mismatched inputs throw") {
  CHECK_THROWS_AS(FeatureMap(0, 10, 1.0, 0), bgrl::Error);
  CHECK_THROWS_AS(FeatureMap(2, 0, 1.0, 0), bgrl::Error);
  CHECK_THROWS_AS(FeatureMap(2, 10, 0.0, 0), bgrl::Error);
  CHECK_THROWS_AS(FeatureMap(2, 10, -1.0, 0), bgrl::Error);
  const FeatureMap map(2, 10, 1.0, 0);
  CHECK_THROWS_AS(map.eval(Eigen::Vector3d::Zero()), bgrl::DimensionError);
}

TEST_CASE("derived seeds are stable and distinct") {
  CHECK(bgrl::derive_seed(1, "a", 0) == bgrl::derive_seed(1, "a", 0));
  CHECK(bgrl::derive_seed(1, "a", 0) != bgrl::derive_seed(1, "a", 1));
  CHECK(bgrl::derive_seed(1, "a", 0) != bgrl::derive_seed(1, "b", 0));
  CHECK(bgrl::derive_seed(1, "a", 0) != bgrl::derive_seed(2, "a", 0));
}

TEST_CASE("uniform and normal streams have the expected moments") {
  bgrl::Rng rng(99);
  const int n = 200000;
  double su = 0.0;
  double sn = 0.0;
  double sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}
