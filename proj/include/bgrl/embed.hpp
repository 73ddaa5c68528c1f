#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "bgrl/envsim.hpp"
#include "bgrl/policy.hpp"
#include "bgrl/transport.hpp"

namespace bgrl {

enum class BemKind {
  FinalState,
  ActionConcat,
  TotalReward,
  RewardToGo,
  StateVisitCount,
  StateActionCount,
  FixedStateFreq,
  MeanXDisplacement,
};

std::string_view to_string(BemKind kind);
BemKind parse_bem_kind(std::string_view name);

// Behavioral embedding map. The discrete kinds read Trajectory::state_ids
// and action_ids.
struct Bem {
  BemKind kind = BemKind::FinalState;
  int num_states = 0;
  int num_actions = 0;
  int fixed_state = 0;

  int output_dim(int state_dim, int action_dim, int horizon) const;
  bool discrete() const;
};

Eigen::VectorXd embed_trajectory(const Bem& bem, const Trajectory& tau);

// Uniform weights over the embedded trajectories, equal points merged.
EmpiricalEmbedding embedding_distribution(const Bem& bem,
                                          const std::vector<Trajectory>& trajectories);

// FIFO buffer of visited states.
class ProbeBuffer {
 public:
  explicit ProbeBuffer(std::size_t capacity);

  void insert(const Eigen::VectorXd& state);
  void insert_trajectory(const Trajectory& tau);

  std::size_t size() const { return states_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return states_.empty(); }

  // Copy of the current contents for concurrent readers.
  std::vector<Eigen::VectorXd> snapshot() const;
  // n states drawn uniformly with replacement.
  std::vector<Eigen::VectorXd> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Eigen::VectorXd> states_;
};

// [s ; mean action] for one state.
Eigen::VectorXd probe_point(const PolicyParams& params, const Eigen::VectorXd& state);

// n points [s ; mean action], s drawn from the buffer with the given seed.
EmpiricalEmbedding probe_embedding(const ProbeBuffer& probe, const PolicyParams& params,
                                   std::size_t n, std::uint64_t seed);

}  // namespace bgrl
