#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bgrl {

struct SuiteReport {
  std::string name;
  int passed = 0;
  int failed = 0;
  // one line per check group
  std::vector<std::string> lines;

  bool ok() const { return failed == 0 && passed > 0; }
  void record(bool pass, const std::string& line);
};

// Sinkhorn (gamma = 1e-3) vs exact OT on `pairs` random 32-point 2-D clouds
// (2% relative), and assignment vs permutation brute force for n <= 6.
SuiteReport verify_transport(int pairs = 20, std::uint64_t seed = 1);

// V(pi~) >= L(pi~) - WD_0 eps and sum_s |rho - rho~| <= WD_0 on random
// layered MDPs with at most 4 states per layer, 2 actions, H <= 3.
SuiteReport verify_theorem1(int instances = 100, std::uint64_t seed = 2);

// Equal policies give WD_0 = 0 under state-action counts; a perturbed
// action distribution gives WD_0 > 0.
SuiteReport verify_lemma_equality(int pairs = 50, std::uint64_t seed = 3);

// Finite-difference checks (relative error <= 1e-4) of log_prob_grad, the
// pathwise gradient of lambda(s, pi_theta(s)), and the dual SGD direction.
SuiteReport verify_gradients(int instances = 50, std::uint64_t seed = 4);

// Dispatch by name: transport, theorem1, lemma-equality, gradients.
// Throws bgrl::Error for an unknown name.
SuiteReport run_suite(std::string_view name);

// Relative error |a - b|_2 / max(|b|_2, floor).
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8);

}  // namespace bgrl
