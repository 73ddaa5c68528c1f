#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgrl/rng.hpp"

namespace bgrl {

// Dense ReLU network: input -> hidden... -> output (linear).
struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;

  // weights + biases of all layers
  int num_network_params() const;
  // network params followed by one log-std per action dimension
  int num_params() const { return num_network_params() + output_dim; }
  std::vector<int> layer_sizes() const;

  bool operator==(const Architecture&) const = default;
};

// Gaussian policy a ~ N(mean_theta(s), diag(exp(log_std))^2) with a
// state-independent log-std. Layout of theta, per layer l:
//   W_l (out x in, row-major), b_l (out); then log_std (output_dim).
struct PolicyParams {
  Architecture arch;
  Eigen::VectorXd theta;

  static PolicyParams zeros(const Architecture& arch, double log_std = 0.0);
  // Weights ~ N(0, weight_scale^2 / fan_in), zero biases.
  static PolicyParams random(const Architecture& arch, double weight_scale,
                             double log_std, std::uint64_t seed);

  Eigen::VectorXd log_std() const;
  void set_log_std(double value);
};

Eigen::VectorXd policy_mean(const PolicyParams& params,
                            const Eigen::VectorXd& state);

// a = mean + exp(log_std) * N(0, I)
Eigen::VectorXd sample_action(const PolicyParams& params,
                              const Eigen::VectorXd& state, Rng& rng);

struct LogProbGrad {
  double log_prob;
  Eigen::VectorXd grad;  // d log pi / d theta, length num_params
};

LogProbGrad log_prob_grad(const PolicyParams& params,
                          const Eigen::VectorXd& state,
                          const Eigen::VectorXd& action);

double log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                const Eigen::VectorXd& action);

// Reparameterized action a = mean(s) + exp(log_std) * eps.
Eigen::VectorXd reparam_action(const PolicyParams& params,
                               const Eigen::VectorXd& state,
                               const Eigen::VectorXd& eps);

struct ReparamGrad {
  Eigen::VectorXd action;
  // cotangent^T (d a / d theta)
  Eigen::VectorXd vjp;
};

ReparamGrad reparam_action_grad(const PolicyParams& params,
                                const Eigen::VectorXd& state,
                                const Eigen::VectorXd& eps,
                                const Eigen::VectorXd& cotangent);

// Full Jacobian d a / d theta (action_dim x num_params).
Eigen::MatrixXd reparam_jacobian(const PolicyParams& params,
                                 const Eigen::VectorXd& state,
                                 const Eigen::VectorXd& eps);

// theta + sigma * eps
PolicyParams perturb(const PolicyParams& params, double sigma,
                     const Eigen::VectorXd& eps);

// Softmax policy over a finite action set.
struct TabularPolicy {
  Eigen::MatrixXd logits;  // states x actions

  Eigen::MatrixXd probabilities() const;
};

// Rows must be distributions within 1e-9.
void validate_stochastic_rows(const Eigen::MatrixXd& policy);

// Binary checkpoint: "BGRLCKPT", u32 version, u32 layer count, u32 layer
// sizes, u32 log_std length, u64 theta length, then theta as float64. All
// integers and floats little-endian.
void save_checkpoint(const std::filesystem::path& path,
                     const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace bgrl
