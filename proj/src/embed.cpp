#include "bgrl/embed.hpp"

#include <string>

#include "bgrl/error.hpp"

namespace bgrl {

namespace {

void require_ids(const Trajectory& tau, bool need_actions) {
  require(!tau.state_ids.empty() && (!need_actions || !tau.action_ids.empty()),
          "embed: discrete embedding requires a trajectory with state ids");
}

}  // namespace

std::string_view to_string(BemKind kind) {
  switch (kind) {
    case BemKind::FinalState: return "final-state";
    case BemKind::ActionConcat: return "action-concat";
    case BemKind::TotalReward: return "total-reward";
    case BemKind::RewardToGo: return "reward-to-go";
    case BemKind::StateVisitCount: return "state-visit";
    case BemKind::StateActionCount: return "state-action";
    case BemKind::FixedStateFreq: return "fixed-state";
    case BemKind::MeanXDisplacement: return "mean-x-displacement";
  }
  return "?";
}

BemKind parse_bem_kind(std::string_view name) {
  for (BemKind k : {BemKind::FinalState, BemKind::ActionConcat, BemKind::TotalReward,
                    BemKind::RewardToGo, BemKind::StateVisitCount,
                    BemKind::StateActionCount, BemKind::FixedStateFreq,
                    BemKind::MeanXDisplacement}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown embedding kind '" + std::string(name) + "'");
}

int Bem::output_dim(int state_dim, int action_dim, int horizon) const {
  switch (kind) {
    case BemKind::FinalState: return state_dim;
    case BemKind::ActionConcat: return (horizon + 1) * action_dim;
    case BemKind::TotalReward: return 1;
    case BemKind::RewardToGo: return horizon + 1;
    case BemKind::StateVisitCount: return num_states;
    case BemKind::StateActionCount: return num_states * num_actions;
    case BemKind::FixedStateFreq: return 1;
    case BemKind::MeanXDisplacement: return 1;
  }
  return 0;
}

bool Bem::discrete() const {
  return kind == BemKind::StateVisitCount || kind == BemKind::StateActionCount ||
         kind == BemKind::FixedStateFreq;
}

Eigen::VectorXd embed_trajectory(const Bem& bem, const Trajectory& tau) {
  const std::size_t len = tau.states.size();
  require(len >= 1, "embed: empty trajectory");
  require_dim(tau.actions.size() == len && tau.rewards.size() == len,
              "embed: trajectory lists differ in length");
  switch (bem.kind) {
    case BemKind::FinalState:
      return tau.states.back();
    case BemKind::ActionConcat: {
      const Eigen::Index k = tau.actions.front().size();
      Eigen::VectorXd out(static_cast<Eigen::Index>(len) * k);
      for (std::size_t t = 0; t < len; ++t) {
        require_dim(tau.actions[t].size() == k, "embed: ragged actions");
        out.segment(static_cast<Eigen::Index>(t) * k, k) = tau.actions[t];
      }
      return out;
    }
    case BemKind::TotalReward:
      return Eigen::VectorXd::Constant(1, tau.total_reward());
    case BemKind::RewardToGo: {
      Eigen::VectorXd out(static_cast<Eigen::Index>(len));
      double acc = 0.0;
      for (std::size_t i = len; i-- > 0;) {
        acc += tau.rewards[i];
        out[static_cast<Eigen::Index>(i)] = acc;
      }
      return out;
    }
    case BemKind::StateVisitCount: {
      require_ids(tau, false);
      require(bem.num_states >= 1, "embed: num_states must be set");
      Eigen::VectorXd out = Eigen::VectorXd::Zero(bem.num_states);
      for (int s : tau.state_ids) {
        require(s >= 0 && s < bem.num_states, "embed: state id out of range");
        out[s] += 1.0;
      }
      return out;
    }
    case BemKind::StateActionCount: {
      require_ids(tau, true);
      require(bem.num_states >= 1 && bem.num_actions >= 1,
              "embed: num_states and num_actions must be set");
      Eigen::VectorXd out = Eigen::VectorXd::Zero(bem.num_states * bem.num_actions);
      for (std::size_t t = 0; t < tau.state_ids.size(); ++t) {
        const int s = tau.state_ids[t];
        const int a = tau.action_ids[t];
        require(s >= 0 && s < bem.num_states && a >= 0 && a < bem.num_actions,
                "embed: state or action id out of range");
        out[s * bem.num_actions + a] += 1.0;
      }
      return out;
    }
    case BemKind::FixedStateFreq: {
      require_ids(tau, false);
      double count = 0.0;
      for (int s : tau.state_ids) count += (s == bem.fixed_state) ? 1.0 : 0.0;
      return Eigen::VectorXd::Constant(1, count);
    }
    case BemKind::MeanXDisplacement: {
      if (len < 2) return Eigen::VectorXd::Zero(1);
      // telescoping mean of x_{t+1} - x_t
      const double dx = tau.states.back()[0] - tau.states.front()[0];
      return Eigen::VectorXd::Constant(1, dx / static_cast<double>(len - 1));
    }
  }
  throw Error("embed: unknown kind");
}

EmpiricalEmbedding embedding_distribution(const Bem& bem,
                                          const std::vector<Trajectory>& trajectories) {
  require(!trajectories.empty(), "embedding_distribution: no trajectories");
  std::vector<Eigen::VectorXd> points;
  points.reserve(trajectories.size());
  for (const auto& tau : trajectories) {
    points.push_back(embed_trajectory(bem, tau));
    require_dim(points.back().size() == points.front().size(),
                "embedding_distribution: mixed embedding dimensions");
  }
  return EmpiricalEmbedding::merged(std::move(points));
}

ProbeBuffer::ProbeBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "ProbeBuffer: capacity must be >= 1");
}

void ProbeBuffer::insert(const Eigen::VectorXd& state) {
  if (!states_.empty()) {
    require_dim(state.size() == states_.front().size(), "ProbeBuffer: state dimension");
  }
  if (states_.size() == capacity_) states_.pop_front();
  states_.push_back(state);
}

void ProbeBuffer::insert_trajectory(const Trajectory& tau) {
  for (const auto& s : tau.states) insert(s);
}

std::vector<Eigen::VectorXd> ProbeBuffer::snapshot() const {
  return {states_.begin(), states_.end()};
}

std::vector<Eigen::VectorXd> ProbeBuffer::sample(std::size_t n, Rng& rng) const {
  require(!states_.empty(), "ProbeBuffer: empty buffer");
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(states_[rng.index(states_.size())]);
  return out;
}

Eigen::VectorXd probe_point(const PolicyParams& params, const Eigen::VectorXd& state) {
  const Eigen::VectorXd mean = policy_mean(params, state);
  Eigen::VectorXd out(state.size() + mean.size());
  out << state, mean;
  return out;
}

EmpiricalEmbedding probe_embedding(const ProbeBuffer& probe, const PolicyParams& params,
                                   std::size_t n, std::uint64_t seed) {
  require(!probe.empty(), "probe_embedding: empty probe buffer");
  require(n >= 1, "probe_embedding: n must be >= 1");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> points;
  points.reserve(n);
  for (const auto& s : probe.sample(n, rng)) points.push_back(probe_point(params, s));
  return EmpiricalEmbedding(std::move(points));
}

}  // namespace bgrl
