#include "bgrl/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bgrl/error.hpp"
#include "bgrl/tabular.hpp"

namespace bgrl {

namespace {

// distance kept between a blocked state and the wall line
constexpr double kWallFace = 1e-9;

Eigen::VectorXd one_hot(int n, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[i] = 1.0;
  return v;
}

int argmax(const Eigen::VectorXd& a) {
  Eigen::Index i = 0;
  a.maxCoeff(&i);
  return static_cast<int>(i);
}

Eigen::Vector2d as2(const Eigen::VectorXd& v, const char* what) {
  require_dim(v.size() == 2, std::string(what) + ": expected a 2-vector");
  return Eigen::Vector2d(v[0], v[1]);
}

// Smooth componentwise bound: unit-scale actions map to steps of up to
// +-bound.
Eigen::Vector2d squash(const Eigen::Vector2d& a, double bound) {
  return bound * a.array().tanh().matrix();
}

class MultiGoalEnv : public Env {
 public:
  explicit MultiGoalEnv(const EnvSpec& spec)
      : spec_(spec), horizon_(spec.resolved_horizon()) {}

  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  int horizon() const override { return horizon_; }

  Eigen::VectorXd reset(Rng& rng) override {
    s_ = Eigen::Vector2d(spec_.init_std * rng.normal(),
                         spec_.init_std * rng.normal());
    return s_;
  }

  StepResult step(const Eigen::VectorXd& action, Rng&) override {
    const Eigen::Vector2d a = as2(action, "MultiGoal");
    const double r = multigoal_reward(s_, a, spec_.goal_a, spec_.goal_b);
    s_ += a;
    return {s_, r};
  }

 private:
  EnvSpec spec_;
  int horizon_;
  Eigen::Vector2d s_ = Eigen::Vector2d::Zero();
};

class DeceptivePointEnv : public Env {
 public:
  explicit DeceptivePointEnv(const EnvSpec& spec)
      : spec_(spec), horizon_(spec.resolved_horizon()) {}

  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  int horizon() const override { return horizon_; }

  Eigen::VectorXd reset(Rng&) override {
    s_ = spec_.start;
    return s_;
  }

  StepResult step(const Eigen::VectorXd& action, Rng&) override {
    const Eigen::Vector2d a = squash(as2(action, "DeceptivePoint"), spec_.max_step);
    StepResult out = deceptive_point_step(s_, a, spec_.wall, spec_.goal);
    s_ = as2(out.state, "DeceptivePoint");
    return out;
  }

 private:
  EnvSpec spec_;
  int horizon_;
  Eigen::Vector2d s_ = Eigen::Vector2d::Zero();
};

// Point mass with velocity; actions are accelerations.
class DeceptiveQuadLiteEnv : public Env {
 public:
  explicit DeceptiveQuadLiteEnv(const EnvSpec& spec)
      : spec_(spec), horizon_(spec.resolved_horizon()) {}

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return horizon_; }

  Eigen::VectorXd reset(Rng&) override {
    pos_ = spec_.start;
    vel_.setZero();
    return state();
  }

  StepResult step(const Eigen::VectorXd& action, Rng&) override {
    const Eigen::Vector2d acc = squash(as2(action, "DeceptiveQuadLite"), spec_.max_step);
    vel_ = spec_.velocity_decay * vel_ + acc;
    bool hit = false;
    pos_ = clip_motion(pos_, vel_, spec_.wall, &hit);
    if (hit) {
      // the normal velocity component is absorbed by the wall
      const int normal = spec_.wall.a.y() == spec_.wall.b.y() ? 1 : 0;
      vel_[normal] = 0.0;
    }
    return {state(), -(pos_ - spec_.goal).norm()};
  }

 private:
  Eigen::VectorXd state() const {
    Eigen::VectorXd s(4);
    s << pos_, vel_;
    return s;
  }

  EnvSpec spec_;
  int horizon_;
  Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel_ = Eigen::Vector2d::Zero();
};

// States 0..L-1 on a line; action 0 moves left, 1 moves right. Arriving at
// the left end pays left_reward, at the right end right_reward.
class ChainEnv : public Env {
 public:
  explicit ChainEnv(const EnvSpec& spec)
      : spec_(spec), horizon_(spec.resolved_horizon()) {
    require(spec.chain_length >= 2, "Chain: chain_length must be >= 2");
    require(spec.chain_start >= 0 && spec.chain_start < spec.chain_length,
            "Chain: chain_start out of range");
  }

  int state_dim() const override { return spec_.chain_length; }
  int action_dim() const override { return 2; }
  int horizon() const override { return horizon_; }
  bool discrete() const override { return true; }
  int num_states() const override { return spec_.chain_length; }
  int num_actions() const override { return 2; }
  int state_id() const override { return pos_; }
  int action_id(const Eigen::VectorXd& a) const override {
    require_dim(a.size() == 2, "Chain: expected a 2-vector action");
    return argmax(a);
  }

  Eigen::VectorXd reset(Rng&) override {
    pos_ = spec_.chain_start;
    return one_hot(spec_.chain_length, pos_);
  }

  StepResult step(const Eigen::VectorXd& action, Rng&) override {
    const int move = action_id(action) == 1 ? 1 : -1;
    pos_ = std::clamp(pos_ + move, 0, spec_.chain_length - 1);
    double r = 0.0;
    if (pos_ == 0) r = spec_.left_reward;
    if (pos_ == spec_.chain_length - 1) r = spec_.right_reward;
    return {one_hot(spec_.chain_length, pos_), r};
  }

 private:
  EnvSpec spec_;
  int horizon_;
  int pos_ = 0;
};

class TabularEnv : public Env {
 public:
  explicit TabularEnv(TabularMDP mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

  int state_dim() const override { return mdp_.num_states; }
  int action_dim() const override { return mdp_.num_actions; }
  int horizon() const override { return mdp_.horizon; }
  bool discrete() const override { return true; }
  int num_states() const override { return mdp_.num_states; }
  int num_actions() const override { return mdp_.num_actions; }
  int state_id() const override { return s_; }
  int action_id(const Eigen::VectorXd& a) const override {
    require_dim(a.size() == mdp_.num_actions, "Tabular: action dimension");
    return argmax(a);
  }

  Eigen::VectorXd reset(Rng& rng) override {
    s_ = draw(mdp_.initial.data(), mdp_.num_states, rng);
    return one_hot(mdp_.num_states, s_);
  }

  StepResult step(const Eigen::VectorXd& action, Rng& rng) override {
    const int a = action_id(action);
    const double* row = &mdp_.transition[(static_cast<std::size_t>(s_) * mdp_.num_actions + a) *
                                         mdp_.num_states];
    const int next = draw(row, mdp_.num_states, rng);
    const double r = mdp_.r(s_, a, next);
    s_ = next;
    return {one_hot(mdp_.num_states, s_), r};
  }

 private:
  static int draw(const double* probs, int n, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < n; ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  TabularMDP mdp_;
  int s_ = 0;
};

}  // namespace

double Trajectory::total_reward() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::MultiGoal: return "multigoal";
    case EnvKind::DeceptivePoint: return "deceptive-point";
    case EnvKind::DeceptiveQuadLite: return "deceptive-quad";
    case EnvKind::TabularRandom: return "tabular";
    case EnvKind::Chain: return "chain";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view name) {
  for (EnvKind k : {EnvKind::MultiGoal, EnvKind::DeceptivePoint,
                    EnvKind::DeceptiveQuadLite, EnvKind::TabularRandom,
                    EnvKind::Chain}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown env kind '" + std::string(name) + "'");
}

int EnvSpec::resolved_horizon() const {
  require(horizon >= 0, "EnvSpec: horizon must be >= 1");
  if (horizon > 0) return horizon;
  switch (kind) {
    case EnvKind::MultiGoal: return 10;
    case EnvKind::DeceptivePoint: return 50;
    case EnvKind::DeceptiveQuadLite: return 50;
    case EnvKind::TabularRandom: return 3;
    case EnvKind::Chain: return 2 * chain_length;
  }
  return 1;
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  switch (spec.kind) {
    case EnvKind::MultiGoal: return std::make_unique<MultiGoalEnv>(spec);
    case EnvKind::DeceptivePoint: return std::make_unique<DeceptivePointEnv>(spec);
    case EnvKind::DeceptiveQuadLite: return std::make_unique<DeceptiveQuadLiteEnv>(spec);
    case EnvKind::Chain: return std::make_unique<ChainEnv>(spec);
    case EnvKind::TabularRandom:
      return make_tabular_env(random_layered_mdp(
          spec.layer_states, spec.num_actions, spec.resolved_horizon(), spec.mdp_seed));
  }
  throw Error("make_env: unknown kind");
}

std::unique_ptr<Env> make_tabular_env(TabularMDP mdp) {
  return std::make_unique<TabularEnv>(std::move(mdp));
}

double multigoal_reward(const Eigen::Vector2d& s, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& goal_a,
                        const Eigen::Vector2d& goal_b) {
  const double d = std::min((s - goal_a).norm(), (s - goal_b).norm());
  return -30.0 * a.squaredNorm() - d * d;
}

Eigen::Vector2d clip_motion(const Eigen::Vector2d& s, const Eigen::Vector2d& a,
                            const Wall& wall, bool* hit) {
  if (hit) *hit = false;
  const bool horizontal = wall.a.y() == wall.b.y();
  require(horizontal || wall.a.x() == wall.b.x(), "wall must be axis-aligned");
  // n: coordinate normal to the wall, u: coordinate along it
  const int n = horizontal ? 1 : 0;
  const int u = 1 - n;
  const double line = wall.a[n];
  const double lo = std::min(wall.a[u], wall.b[u]);
  const double hi = std::max(wall.a[u], wall.b[u]);
  const Eigen::Vector2d e = s + a;
  const double ds = s[n] - line;
  const double de = e[n] - line;
  const bool crosses = (ds < 0.0 && de >= 0.0) || (ds > 0.0 && de <= 0.0);
  if (!crosses) return e;
  const double t = ds / (ds - de);
  const double along = s[u] + t * a[u];
  if (along < lo || along > hi) return e;
  if (hit) *hit = true;
  Eigen::Vector2d out;
  out[u] = along;
  out[n] = line + (ds < 0.0 ? -kWallFace : kWallFace);
  return out;
}

StepResult deceptive_point_step(const Eigen::Vector2d& s,
                                const Eigen::Vector2d& a, const Wall& wall,
                                const Eigen::Vector2d& goal) {
  const Eigen::Vector2d next = clip_motion(s, a, wall);
  return {next, -(next - goal).norm()};
}

ActionFn gaussian_actor(const PolicyParams& params, ActionMode mode) {
  if (mode == ActionMode::Mean) {
    return [params](const Eigen::VectorXd& s, Rng&) { return policy_mean(params, s); };
  }
  return [params](const Eigen::VectorXd& s, Rng& rng) {
    return sample_action(params, s, rng);
  };
}

Trajectory rollout(Env& env, const ActionFn& actor, std::uint64_t seed) {
  Rng rng(seed);
  const int h = env.horizon();
  Trajectory tau;
  tau.states.reserve(h + 1);
  tau.actions.reserve(h + 1);
  tau.rewards.reserve(h + 1);
  Eigen::VectorXd s = env.reset(rng);
  for (int t = 0; t <= h; ++t) {
    Eigen::VectorXd a = actor(s, rng);
    require_dim(a.size() == env.action_dim(),
                "rollout: action dimension mismatch at step " + std::to_string(t));
    if (!a.allFinite()) {
      throw Error("rollout: non-finite action at step " + std::to_string(t));
    }
    if (env.discrete()) {
      tau.state_ids.push_back(env.state_id());
      tau.action_ids.push_back(env.action_id(a));
    }
    StepResult next = env.step(a, rng);
    if (!std::isfinite(next.reward)) {
      throw Error("rollout: non-finite reward at step " + std::to_string(t));
    }
    tau.states.push_back(std::move(s));
    tau.actions.push_back(std::move(a));
    tau.rewards.push_back(next.reward);
    s = std::move(next.state);
  }
  return tau;
}

Trajectory rollout(Env& env, const PolicyParams& params, std::uint64_t seed,
                   ActionMode mode) {
  require_dim(params.arch.input_dim == env.state_dim() &&
                  params.arch.output_dim == env.action_dim(),
              "rollout: policy dimensions do not match environment");
  return rollout(env, gaussian_actor(params, mode), seed);
}

}  // namespace bgrl
