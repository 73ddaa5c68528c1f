#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "bgrl/policy.hpp"
#include "bgrl/rng.hpp"

namespace bgrl {

// One episode s_0, a_0, r_0, ..., s_H, a_H, r_H. Discrete environments also
// record integer state and action ids.
struct Trajectory {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> actions;
  std::vector<double> rewards;
  std::vector<int> state_ids;
  std::vector<int> action_ids;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  double total_reward() const;
};

enum class EnvKind { MultiGoal, DeceptivePoint, DeceptiveQuadLite, TabularRandom, Chain };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

// Axis-aligned wall segment.
struct Wall {
  Eigen::Vector2d a{-2.0, 1.5};
  Eigen::Vector2d b{2.0, 1.5};
};

struct EnvSpec {
  EnvKind kind = EnvKind::MultiGoal;
  // 0 selects the per-kind default
  int horizon = 0;

  // MultiGoal
  Eigen::Vector2d goal_a{-1.0, 0.0};
  Eigen::Vector2d goal_b{1.0, 0.0};
  double init_std = 0.31622776601683794;  // sqrt(0.1)

  // DeceptivePoint / DeceptiveQuadLite
  Eigen::Vector2d start{0.0, 0.0};
  Eigen::Vector2d goal{0.0, 3.0};
  Wall wall;
  // step (point) or acceleration (quad) is max_step * tanh(a)
  double max_step = 0.3;
  double velocity_decay = 0.8;

  // TabularRandom: states per time layer, actions, generator seed
  int layer_states = 3;
  int num_actions = 2;
  std::uint64_t mdp_seed = 0;

  // Chain
  int chain_length = 8;
  int chain_start = 2;
  double left_reward = 0.1;
  double right_reward = 1.0;

  int resolved_horizon() const;
};

struct StepResult {
  Eigen::VectorXd state;
  double reward;
};

class Env {
 public:
  virtual ~Env() = default;

  // policy input dimension
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;

  virtual Eigen::VectorXd reset(Rng& rng) = 0;
  virtual StepResult step(const Eigen::VectorXd& action, Rng& rng) = 0;

  // Finite state spaces only.
  virtual bool discrete() const { return false; }
  virtual int num_states() const { return 0; }
  virtual int num_actions() const { return 0; }
  virtual int state_id() const { return -1; }
  virtual int action_id(const Eigen::VectorXd& /*action*/) const { return -1; }
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

double multigoal_reward(const Eigen::Vector2d& s, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& goal_a,
                        const Eigen::Vector2d& goal_b);

// s' = s + a truncated at the wall face; r = -|s' - goal|.
StepResult deceptive_point_step(const Eigen::Vector2d& s,
                                const Eigen::Vector2d& a, const Wall& wall,
                                const Eigen::Vector2d& goal);

// Segment s -> s + a clipped so it does not cross the wall.
Eigen::Vector2d clip_motion(const Eigen::Vector2d& s, const Eigen::Vector2d& a,
                            const Wall& wall, bool* hit = nullptr);

using ActionFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>;

enum class ActionMode { Sample, Mean };

ActionFn gaussian_actor(const PolicyParams& params,
                        ActionMode mode = ActionMode::Sample);

// Exactly H+1 steps; the RNG stream for the episode is seeded by `seed`.
Trajectory rollout(Env& env, const ActionFn& actor, std::uint64_t seed);
Trajectory rollout(Env& env, const PolicyParams& params, std::uint64_t seed,
                   ActionMode mode = ActionMode::Sample);

}  // namespace bgrl
