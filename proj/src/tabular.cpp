#include "bgrl/tabular.hpp"

#include <cmath>
#include <string>

#include "bgrl/error.hpp"

namespace bgrl {

namespace {

// Dirichlet(1, ..., 1) via normalized exponentials.
std::vector<double> dirichlet_ones(int n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = -std::log1p(-rng.uniform());
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

int draw(const double* probs, int n, Rng& rng) {
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

struct Enumerator {
  const TabularMDP& mdp;
  const Eigen::MatrixXd& policy;
  CountEmbedding kind;
  std::size_t max_paths;
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;
  Eigen::VectorXd counts;

  void visit(int t, int s, double prob) {
    const int na = mdp.num_actions;
    for (int a = 0; a < na; ++a) {
      const double pa = policy(s, a);
      if (pa <= 0.0) continue;
      const int slot = kind == CountEmbedding::StateVisit ? s : s * na + a;
      counts[slot] += 1.0;
      if (t == mdp.horizon) {
        if (points.size() >= max_paths) {
          throw Error("trajectory enumeration exceeds " + std::to_string(max_paths) +
                      " paths; use a smaller instance");
        }
        points.push_back(counts);
        weights.push_back(prob * pa);
      } else {
        for (int next = 0; next < mdp.num_states; ++next) {
          const double pn = mdp.p(s, a, next);
          if (pn > 0.0) visit(t + 1, next, prob * pa * pn);
        }
      }
      counts[slot] -= 1.0;
    }
  }
};

}  // namespace

int TabularMDP::layer_of(int s) const {
  return layer_size > 0 ? s / layer_size : 0;
}

void TabularMDP::validate() const {
  require(num_states >= 1 && num_actions >= 1, "TabularMDP: empty state or action set");
  require(horizon >= 0, "TabularMDP: negative horizon");
  const std::size_t n = static_cast<std::size_t>(num_states) * num_actions * num_states;
  require_dim(transition.size() == n && reward.size() == n,
              "TabularMDP: tensor sizes do not match num_states/num_actions");
  require_dim(initial.size() == num_states, "TabularMDP: initial distribution size");
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double total = 0.0;
      for (int next = 0; next < num_states; ++next) {
        require(p(s, a, next) >= 0.0, "TabularMDP: negative transition probability");
        require(std::isfinite(r(s, a, next)), "TabularMDP: non-finite reward");
        total += p(s, a, next);
      }
      require(std::abs(total - 1.0) <= 1e-12,
              "TabularMDP: P(.|" + std::to_string(s) + "," + std::to_string(a) +
                  ") does not sum to 1");
    }
  }
  require((initial.array() >= 0.0).all() && std::abs(initial.sum() - 1.0) <= 1e-12,
          "TabularMDP: initial distribution is not a distribution");
}

TabularMDP random_layered_mdp(int layer_states, int num_actions, int horizon,
                              std::uint64_t seed) {
  require(layer_states >= 1 && num_actions >= 1 && horizon >= 0,
          "random_layered_mdp: invalid sizes");
  Rng rng(seed);
  TabularMDP m;
  m.layer_size = layer_states;
  m.num_states = layer_states * (horizon + 1);
  m.num_actions = num_actions;
  m.horizon = horizon;
  const std::size_t n = static_cast<std::size_t>(m.num_states) * num_actions * m.num_states;
  m.transition.assign(n, 0.0);
  m.reward.assign(n, 0.0);
  for (int s = 0; s < m.num_states; ++s) {
    const int t = m.layer_of(s);
    const int target = std::min(t + 1, horizon) * layer_states;
    for (int a = 0; a < num_actions; ++a) {
      const auto row = dirichlet_ones(layer_states, rng);
      // renormalize in the target layer so rows sum to 1 to rounding
      double total = 0.0;
      for (double x : row) total += x;
      const std::size_t base = (static_cast<std::size_t>(s) * num_actions + a) * m.num_states;
      for (int j = 0; j < layer_states; ++j) {
        m.transition[base + target + j] = row[j] / total;
        m.reward[base + target + j] = rng.uniform();
      }
    }
  }
  m.initial = Eigen::VectorXd::Zero(m.num_states);
  const auto init = dirichlet_ones(layer_states, rng);
  for (int j = 0; j < layer_states; ++j) m.initial[j] = init[j];
  return m;
}

Eigen::MatrixXd random_tabular_policy(int num_states, int num_actions,
                                      std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd pi(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    const auto row = dirichlet_ones(num_actions, rng);
    for (int a = 0; a < num_actions; ++a) pi(s, a) = row[a];
  }
  return pi;
}

TabularValues tabular_value(const TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  mdp.validate();
  require_dim(policy.rows() == mdp.num_states && policy.cols() == mdp.num_actions,
              "tabular_value: policy shape does not match MDP");
  validate_stochastic_rows(policy);
  const int ns = mdp.num_states;
  const int na = mdp.num_actions;
  const int h = mdp.horizon;

  // Backward induction over time; v_next holds V_{t+1}.
  Eigen::MatrixXd q_t(ns, na);
  Eigen::VectorXd v_next = Eigen::VectorXd::Zero(ns);
  TabularValues out;
  out.v = Eigen::VectorXd::Zero(ns);
  out.q = Eigen::MatrixXd::Zero(ns, na);
  Eigen::VectorXd v0;
  for (int t = h; t >= 0; --t) {
    Eigen::VectorXd v_t(ns);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        double q = 0.0;
        for (int next = 0; next < ns; ++next) {
          const double p = mdp.p(s, a, next);
          if (p == 0.0) continue;
          q += p * (mdp.r(s, a, next) + (t < h ? v_next[next] : 0.0));
        }
        q_t(s, a) = q;
      }
      v_t[s] = policy.row(s).dot(q_t.row(s));
      if (mdp.layer_of(s) == t || (mdp.layer_size == 0 && t == 0)) {
        out.v[s] = v_t[s];
        out.q.row(s) = q_t.row(s);
      }
    }
    v_next = v_t;
    if (t == 0) v0 = v_t;
  }
  out.advantage = out.q.colwise() - out.v;
  out.total = mdp.initial.dot(v0);

  out.rho = Eigen::VectorXd::Zero(ns);
  Eigen::VectorXd d = mdp.initial;
  for (int t = 0; t <= h; ++t) {
    out.rho += d;
    if (t == h) break;
    Eigen::VectorXd next_d = Eigen::VectorXd::Zero(ns);
    for (int s = 0; s < ns; ++s) {
      if (d[s] == 0.0) continue;
      for (int a = 0; a < na; ++a) {
        const double w = d[s] * policy(s, a);
        if (w == 0.0) continue;
        for (int next = 0; next < ns; ++next) next_d[next] += w * mdp.p(s, a, next);
      }
    }
    d = next_d;
  }
  return out;
}

Trajectory sample_tabular_trajectory(const TabularMDP& mdp,
                                     const Eigen::MatrixXd& policy, Rng& rng) {
  Trajectory tau;
  const int ns = mdp.num_states;
  const int na = mdp.num_actions;
  int s = draw(mdp.initial.data(), ns, rng);
  for (int t = 0; t <= mdp.horizon; ++t) {
    Eigen::VectorXd prow = policy.row(s).transpose();
    const int a = draw(prow.data(), na, rng);
    const double* trow = &mdp.transition[(static_cast<std::size_t>(s) * na + a) * ns];
    const int next = draw(trow, ns, rng);
    tau.states.push_back(Eigen::VectorXd::Unit(ns, s));
    tau.actions.push_back(Eigen::VectorXd::Unit(na, a));
    tau.rewards.push_back(mdp.r(s, a, next));
    tau.state_ids.push_back(s);
    tau.action_ids.push_back(a);
    s = next;
  }
  return tau;
}

EmpiricalEmbedding enumerate_embedding(const TabularMDP& mdp,
                                       const Eigen::MatrixXd& policy,
                                       CountEmbedding kind, std::size_t max_paths) {
  mdp.validate();
  require_dim(policy.rows() == mdp.num_states && policy.cols() == mdp.num_actions,
              "enumerate_embedding: policy shape does not match MDP");
  validate_stochastic_rows(policy);
  const int dim = kind == CountEmbedding::StateVisit ? mdp.num_states
                                                      : mdp.num_states * mdp.num_actions;
  Enumerator e{mdp, policy, kind, max_paths, {}, {}, Eigen::VectorXd::Zero(dim)};
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.initial[s] > 0.0) e.visit(0, s, mdp.initial[s]);
  }
  return EmpiricalEmbedding::merged(std::move(e.points), std::move(e.weights));
}

double exact_count_wd0(const TabularMDP& mdp, const Eigen::MatrixXd& pi,
                       const Eigen::MatrixXd& pi_tilde, CountEmbedding kind) {
  return exact_ot_discrete(enumerate_embedding(mdp, pi, kind),
                           enumerate_embedding(mdp, pi_tilde, kind), CostKind::L1)
      .value;
}

ImprovementReport verify_policy_improvement(const TabularMDP& mdp,
                                            const Eigen::MatrixXd& pi,
                                            const Eigen::MatrixXd& pi_tilde,
                                            double wd0) {
  require(wd0 >= 0.0 && std::isfinite(wd0), "verify_policy_improvement: wd0 must be >= 0");
  const TabularValues base = tabular_value(mdp, pi);
  const TabularValues next = tabular_value(mdp, pi_tilde);
  ImprovementReport rep;
  rep.value_new = next.total;
  double gain = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    gain += base.rho[s] * pi_tilde.row(s).dot(base.advantage.row(s));
  }
  rep.surrogate = base.total + gain;
  rep.epsilon = base.advantage.cwiseAbs().maxCoeff();
  rep.wd0 = wd0;
  rep.slack = rep.value_new - (rep.surrogate - wd0 * rep.epsilon);
  rep.visit_l1 = (base.rho - next.rho).cwiseAbs().sum();
  // rounding allowance for sums of O(H) terms in [0, 1]
  constexpr double kTol = 1e-9;
  rep.holds = rep.slack >= -kTol;
  rep.visit_bound_holds = rep.visit_l1 <= wd0 + kTol;
  return rep;
}

}  // namespace bgrl
