#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bgrl/envsim.hpp"
#include "bgrl/transport.hpp"

namespace bgrl {

// Finite-horizon MDP. States are grouped in time layers of `layer_size`
// (layer t holds ids t*layer_size ... (t+1)*layer_size - 1), so a state
// never recurs within an episode. layer_size == 0 means no layering.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int layer_size = 0;
  // P(s' | s, a) at [(s * A + a) * S + s']
  std::vector<double> transition;
  // R(s', a, s) at the same index
  std::vector<double> reward;
  Eigen::VectorXd initial;

  double p(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double r(int s, int a, int next) const {
    return reward[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  // Time step at which state s can be visited (0 when unlayered).
  int layer_of(int s) const;

  void validate() const;
};

// Layers 0..H of `layer_states` states each. Transition rows from layer t
// are Dirichlet(1) over layer t+1; the last layer maps to itself. Initial
// distribution Dirichlet(1) over layer 0; rewards uniform in [0, 1].
TabularMDP random_layered_mdp(int layer_states, int num_actions, int horizon,
                              std::uint64_t seed);

// Environment view of an MDP: one-hot state input, argmax action decoding.
std::unique_ptr<Env> make_tabular_env(TabularMDP mdp);

// Random stochastic policy matrix (states x actions), Dirichlet(1) rows.
Eigen::MatrixXd random_tabular_policy(int num_states, int num_actions,
                                      std::uint64_t seed);

struct TabularValues {
  // V(s) and Q(s, a) at the time step of s's layer
  Eigen::VectorXd v;
  Eigen::MatrixXd q;
  Eigen::MatrixXd advantage;
  // expected visit counts over t = 0..H
  Eigen::VectorXd rho;
  double total = 0.0;
};

TabularValues tabular_value(const TabularMDP& mdp, const Eigen::MatrixXd& policy);

Trajectory sample_tabular_trajectory(const TabularMDP& mdp,
                                     const Eigen::MatrixXd& policy, Rng& rng);

enum class CountEmbedding { StateVisit, StateAction };

inline constexpr std::size_t kMaxEnumeratedPaths = 100000;

// Exact embedding distribution by enumerating every trajectory with
// positive probability; equal points are merged.
EmpiricalEmbedding enumerate_embedding(const TabularMDP& mdp,
                                       const Eigen::MatrixXd& policy,
                                       CountEmbedding kind,
                                       std::size_t max_paths = kMaxEnumeratedPaths);

// Exact WD_0 with L1 cost between the two policies' embedding distributions.
double exact_count_wd0(const TabularMDP& mdp, const Eigen::MatrixXd& pi,
                       const Eigen::MatrixXd& pi_tilde, CountEmbedding kind);

struct ImprovementReport {
  double value_new = 0.0;   // V(pi_tilde)
  double surrogate = 0.0;   // L(pi_tilde)
  double epsilon = 0.0;     // max |A^pi|
  double wd0 = 0.0;
  double slack = 0.0;       // V(pi_tilde) - (L - wd0 * epsilon)
  double visit_l1 = 0.0;    // sum_s |rho_pi(s) - rho_pi_tilde(s)|
  bool holds = false;
  bool visit_bound_holds = false;
};

ImprovementReport verify_policy_improvement(const TabularMDP& mdp,
                                            const Eigen::MatrixXd& pi,
                                            const Eigen::MatrixXd& pi_tilde,
                                            double wd0);

}  // namespace bgrl
