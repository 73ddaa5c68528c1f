#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "bgrl/algorithms.hpp"
#include "bgrl/error.hpp"

using namespace bgrl;

namespace {

EnvSpec deceptive() {
  EnvSpec s;
  s.kind = EnvKind::DeceptivePoint;
  return s;
}

EnvSpec multigoal() {
  EnvSpec s;
  s.kind = EnvKind::MultiGoal;
  return s;
}

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// Reference ES iteration built from rollouts, the dual solver and the score
// formula directly. `fixed` pins the base distribution when given.
Eigen::VectorXd reference_bges(const PolicyParams& params, const EnvSpec& spec, const Bem& bem,
                               const RegularizedObjectiveCfg& cfg, int n, double sigma,
                               double eta, std::uint64_t seed,
                               const std::vector<Eigen::VectorXd>* fixed) {
  std::vector<Eigen::VectorXd> eps(n);
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, "es-eps", k));
    eps[k] = rng.normal_vector(params.theta.size());
  }
  std::vector<double> ret(n);
  std::vector<Eigen::VectorXd> emb(n);
  for (int k = 0; k < n; ++k) {
    PolicyParams p = params;
    p.theta += sigma * eps[k];
    auto env = make_env(spec);
    const Trajectory tau = rollout(*env, p, derive_seed(seed, "rollout", k), ActionMode::Mean);
    ret[k] = tau.total_reward();
    emb[k] = embed_trajectory(bem, tau);
  }
  auto env = make_env(spec);
  const Trajectory base = rollout(*env, params, derive_seed(seed, "rollout", n), ActionMode::Mean);
  const double r_t = base.total_reward();
  const Eigen::VectorXd x_t = embed_trajectory(bem, base);

  const std::vector<Eigen::VectorXd> mu_pts = fixed ? *fixed : std::vector{x_t};
  DualPotentials pot = make_potentials(static_cast<int>(x_t.size()), static_cast<int>(x_t.size()),
                                       cfg.num_features, cfg.rff_bandwidth, cfg.gamma,
                                       cfg.alpha_dual, derive_seed(seed, "potentials"));
  pot = wd_solve(EmpiricalEmbedding(mu_pts), EmpiricalEmbedding(emb), cfg.cost, cfg.dual_steps,
                 pot, derive_seed(seed, "dual"));

  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.theta.size());
  for (int k = 0; k < n; ++k) {
    double wd = 0.0;
    for (const auto& x : mu_pts) {
      const double lx = test_fn_eval(pot, Side::Mu, x);
      const double ly = test_fn_eval(pot, Side::Nu, emb[k]);
      const double f = std::exp(std::clamp(
          (lx - ly - transport_cost(cfg.cost, x, emb[k])) / cfg.gamma, -30.0, 30.0));
      wd += lx - ly - cfg.gamma * f;
    }
    wd /= static_cast<double>(mu_pts.size());
    g += ((1.0 - cfg.beta) * (ret[k] - r_t) + cfg.beta * wd) * eps[k];
  }
  return params.theta + eta * (g / sigma);
}

// Central difference of a scalar function of theta.
template <class F>
Eigen::VectorXd fd_grad(const Eigen::VectorXd& theta, F f, double h = 1e-6) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd p = theta, m = theta;
    p[i] += h;
    m[i] -= h;
    g[i] = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

struct ThreadsGuard {
  explicit ThreadsGuard(const char* v) { setenv("BGRL_THREADS", v, 1); }
  ~ThreadsGuard() { unsetenv("BGRL_THREADS"); }
};

}  // namespace

TEST_CASE("es_update is theta + eta/sigma sum score eps") {
  PolicyParams p = PolicyParams::zeros({1, {}, 1});
  p.theta << 1.0, -2.0, 0.5;
  std::vector<Eigen::VectorXd> eps{Eigen::Vector3d(1, 0, 2), Eigen::Vector3d(0, 3, -1)};
  es_update(p, eps, {2.0, -1.0}, 0.5, 0.1);
  CHECK(p.theta[0] == doctest::Approx(1.0 + 0.2 * 2.0));
  CHECK(p.theta[1] == doctest::Approx(-2.0 + 0.2 * -3.0));
  CHECK(p.theta[2] == doctest::Approx(0.5 + 0.2 * 5.0));
  CHECK_THROWS_AS(es_update(p, eps, {1.0}, 0.5, 0.1), DimensionError);
}

TEST_CASE("antithetic updates ignore a constant shift of the scores") {
  const PolicyParams p = PolicyParams::random({2, {4}, 2}, 1.0, -0.5, 3);
  EsCfg es;
  es.n = 6;
  es.antithetic = true;
  const EsRollouts ro = es_rollouts(p, deceptive(), Bem{}, es, 11);
  for (int k = 0; k < es.n; k += 2) CHECK(same(ro.eps[k + 1], -ro.eps[k]));
  std::vector<double> s{0.3, -1.0, 2.0, 0.1, -0.7, 1.4};
  std::vector<double> shifted = s;
  for (double& v : shifted) v += 17.0;
  PolicyParams a = p, b = p;
  es_update(a, ro.eps, s, es.sigma, es.eta);
  es_update(b, ro.eps, shifted, es.sigma, es.eta);
  CHECK((a.theta - b.theta).norm() < 1e-12);
}

TEST_CASE("es_rollouts: returns and embeddings match direct rollouts") {
  const PolicyParams p = PolicyParams::random({2, {4}, 2}, 1.0, -0.5, 5);
  EsCfg es;
  es.n = 4;
  es.episodes = 2;
  es.mode = ActionMode::Sample;
  const EsRollouts ro = es_rollouts(p, deceptive(), Bem{}, es, 21);
  REQUIRE(ro.returns.size() == 4);
  for (int k = 0; k <= es.n; ++k) {
    const PolicyParams q = k < es.n ? perturb(p, es.sigma, ro.eps[k]) : p;
    double total = 0.0;
    for (int j = 0; j < 2; ++j) {
      auto env = make_env(deceptive());
      const Trajectory tau =
          rollout(*env, q, derive_seed(21, "rollout", k * 2 + j), ActionMode::Sample);
      total += tau.total_reward();
      const auto& emb = k < es.n ? ro.embeddings[k][j] : ro.base_embeddings[j];
      CHECK(same(emb, tau.states.back()));
    }
    CHECK((k < es.n ? ro.returns[k] : ro.base_return) == total / 2.0);
  }
}

TEST_CASE("bges_step matches a straight-line reference bitwise") {
  const PolicyParams p = PolicyParams::random({2, {5, 5}, 2}, 1.0, -0.5, 9);
  RegularizedObjectiveCfg cfg;
  cfg.beta = 0.7;
  cfg.gamma = 0.5;
  cfg.alpha_dual = 0.3;
  cfg.dual_steps = 50;
  EsCfg es;
  es.n = 8;
  es.sigma = 0.05;
  es.eta = 1e-3;
  const Eigen::VectorXd expect =
      reference_bges(p, deceptive(), Bem{}, cfg, es.n, es.sigma, es.eta, 77, nullptr);
  BgesState st{p, std::nullopt, {}, std::nullopt, 0};
  const IterationRecord rec = bges_step(st, deceptive(), Bem{}, cfg, es, 77);
  CHECK(same(st.params.theta, expect));
  CHECK(rec.iter == 0);
  CHECK(std::isfinite(rec.wd_estimate));
  CHECK(rec.wd_estimate == doctest::Approx(rec.dual_objective + cfg.gamma));
  CHECK(st.iter == 1);
}

TEST_CASE("bges_step with beta = 0 is vanilla ES") {
  const PolicyParams p = PolicyParams::random({2, {5}, 2}, 1.0, -0.5, 2);
  RegularizedObjectiveCfg cfg;
  EsCfg es;
  es.n = 6;
  const EsRollouts ro = es_rollouts(p, deceptive(), Bem{}, es, 5);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.theta.size());
  for (int k = 0; k < es.n; ++k) g += (ro.returns[k] - ro.base_return) * ro.eps[k];
  const Eigen::VectorXd expect = p.theta + es.eta * (g / es.sigma);
  BgesState st{p, std::nullopt, {}, std::nullopt, 0};
  bges_step(st, deceptive(), Bem{}, cfg, es, 5);
  CHECK(same(st.params.theta, expect));
}

TEST_CASE("bges history keeps the last window iterations") {
  RegularizedObjectiveCfg cfg;
  cfg.window = 2;
  EsCfg es;
  es.n = 4;
  BgesState st{PolicyParams::random({2, {4}, 2}, 1.0, -0.5, 1), std::nullopt, {}, std::nullopt,
               0};
  for (int t = 0; t < 4; ++t) {
    bges_step(st, deceptive(), Bem{}, cfg, es, derive_seed(3, "iter", t));
    CHECK(static_cast<int>(st.history.size()) == std::min(t + 1, 2));
    CHECK(st.history.back().size() == 4);
  }
  REQUIRE(st.pot.has_value());
  CHECK(st.pot->t == 4 * cfg.dual_steps);
}

TEST_CASE("imitation scores each perturbation against the fixed expert") {
  EnvSpec chain;
  chain.kind = EnvKind::Chain;
  const Bem bem{BemKind::RewardToGo};
  auto env = make_env(chain);
  const ActionFn right = [](const Eigen::VectorXd&, Rng&) {
    return Eigen::VectorXd(Eigen::Vector2d(0, 1));
  };
  std::vector<Eigen::VectorXd> expert;
  for (int i = 0; i < 3; ++i) expert.push_back(embed_trajectory(bem, rollout(*env, right, i)));

  const PolicyParams p = PolicyParams::random({chain.chain_length, {5}, 2}, 1.0, -0.5, 4);
  RegularizedObjectiveCfg cfg;
  cfg.beta = -2.0;
  cfg.gamma = 5.0;
  cfg.rff_bandwidth = 5.0;
  cfg.alpha_dual = 0.3;
  cfg.dual_steps = 40;
  EsCfg es;
  es.n = 6;
  es.sigma = 0.1;
  es.eta = 1e-3;
  const Eigen::VectorXd expect = reference_bges(p, chain, bem, cfg, es.n, es.sigma, es.eta,
                                                derive_seed(8, "iter", 0), &expert);
  PolicyParams out;
  const auto recs = imitation_run(p, chain, bem, EmpiricalEmbedding(expert), cfg, es, 1, 8, &out);
  REQUIRE(recs.size() == 1);
  CHECK(same(out.theta, expect));

  const auto three = imitation_run(p, chain, bem, EmpiricalEmbedding(expert), cfg, es, 3, 8);
  CHECK(three.size() == 3);
  CHECK(three[2].iter == 2);
  CHECK_THROWS_AS(imitation_run(p, chain, bem, EmpiricalEmbedding(), cfg, es, 3, 8), Error);
}

TEST_CASE("paired_dual_score with zero potentials") {
  DualPotentials pot = make_potentials(1, 1, 8, 1.0, 0.5, 0.1, 3);
  const std::vector<Eigen::VectorXd> xs{Eigen::VectorXd::Constant(1, 0.0),
                                        Eigen::VectorXd::Constant(1, 1.0)};
  const std::vector<Eigen::VectorXd> ys{Eigen::VectorXd::Constant(1, 2.0)};
  const double expect = -0.5 * (std::exp(-2.0 / 0.5) + std::exp(-1.0 / 0.5)) / 2.0;
  CHECK(paired_dual_score(pot, xs, ys, CostKind::L2) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(paired_dual_score(pot, {}, ys, CostKind::L2), Error);
}

TEST_CASE("configuration errors") {
  RegularizedObjectiveCfg cfg;
  cfg.gamma = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "smoothed solver requires gamma > 0", Error);
  EsCfg es;
  es.n = 5;
  es.antithetic = true;
  CHECK_THROWS_AS(es.validate(), Error);
  es.n = 1;
  es.antithetic = false;
  CHECK_THROWS_AS(es.validate(), Error);
  PgCfg pg;
  pg.ratio_clip = 1.0;
  CHECK_THROWS_AS(pg.validate(), Error);
}

TEST_CASE("thread count and parallel_for") {
  {
    ThreadsGuard g("3");
    CHECK(thread_count() == 3);
    std::vector<int> out(50, 0);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    for (int i = 0; i < 50; ++i) CHECK(out[i] == i * i);
    CHECK_THROWS_WITH(parallel_for(20,
                                   [](std::size_t i) {
                                     if (i == 7 || i == 13)
                                       throw std::runtime_error("at " + std::to_string(i));
                                   }),
                      "at 7");
  }
  {
    ThreadsGuard g("junk");
    CHECK(thread_count() >= 1);
  }
}

TEST_CASE("bges_step is independent of the thread count") {
  RegularizedObjectiveCfg cfg;
  cfg.beta = 0.5;
  EsCfg es;
  es.n = 8;
  es.mode = ActionMode::Sample;
  const PolicyParams p = PolicyParams::random({2, {5}, 2}, 1.0, -0.5, 6);
  Eigen::VectorXd first;
  for (const char* threads : {"1", "4"}) {
    ThreadsGuard g(threads);
    BgesState st{p, std::nullopt, {}, std::nullopt, 0};
    bges_step(st, deceptive(), Bem{}, cfg, es, 19);
    if (first.size() == 0) {
      first = st.params.theta;
    } else {
      CHECK(same(first, st.params.theta));
    }
  }
}

TEST_CASE("batch_advantages: reward-to-go minus the per-step batch mean") {
  Trajectory a, b;
  a.rewards = {1.0, 2.0, 3.0};
  b.rewards = {0.0, 0.0, 1.0};
  const auto adv = batch_advantages({a, b});
  // reward-to-go: a = 6 5 3, b = 1 1 1
  CHECK(adv[0][0] == doctest::Approx(2.5));
  CHECK(adv[0][1] == doctest::Approx(2.0));
  CHECK(adv[0][2] == doctest::Approx(1.0));
  CHECK(adv[1][0] == doctest::Approx(-2.5));
  CHECK(adv[1][2] == doctest::Approx(-1.0));

  Rng rng(4);
  std::vector<Trajectory> batch(7);
  for (auto& tau : batch) {
    for (int t = 0; t < 5; ++t) tau.rewards.push_back(rng.normal());
  }
  const auto many = batch_advantages(batch);
  for (int t = 0; t < 5; ++t) {
    double s = 0.0;
    for (const auto& row : many) s += row[t];
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("trajectory_score and surrogate_gradient match finite differences") {
  const Architecture arch{2, {4}, 2};
  const PolicyParams prev = PolicyParams::random(arch, 1.0, -0.3, 8);
  std::vector<Trajectory> batch;
  for (int i = 0; i < 3; ++i) {
    auto env = make_env(multigoal());
    batch.push_back(rollout(*env, prev, derive_seed(2, "b", i)));
    batch.back().states.resize(6);
    batch.back().actions.resize(6);
    batch.back().rewards.resize(6);
  }
  const auto adv = batch_advantages(batch);
  std::vector<std::vector<double>> prev_lp(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].states.size(); ++t) {
      prev_lp[i].push_back(log_prob(prev, batch[i].states[t], batch[i].actions[t]));
    }
  }
  PolicyParams cur = prev;
  cur.theta += 0.05 * Rng(3).normal_vector(cur.theta.size());

  auto total_lp = [&](const Eigen::VectorXd& th) {
    PolicyParams q{arch, th};
    double s = 0.0;
    for (std::size_t t = 0; t < batch[0].states.size(); ++t) {
      s += log_prob(q, batch[0].states[t], batch[0].actions[t]);
    }
    return s;
  };
  const Eigen::VectorXd score = trajectory_score(cur, batch[0]);
  const Eigen::VectorXd fd = fd_grad(cur.theta, total_lp);
  CHECK((score - fd).norm() / fd.norm() < 1e-6);

  auto surrogate = [&](const Eigen::VectorXd& th) {
    return surrogate_gradient(PolicyParams{arch, th}, batch, adv, prev_lp, 1e6).value;
  };
  const SurrogateGrad sg = surrogate_gradient(cur, batch, adv, prev_lp, 1e6);
  const Eigen::VectorXd fd2 = fd_grad(cur.theta, surrogate);
  CHECK((sg.grad - fd2).norm() / fd2.norm() < 1e-6);
  CHECK(sg.clips == 0);

  // ratio 1 at the previous policy: value is the mean summed advantage
  double expect = 0.0;
  for (const auto& row : adv) {
    for (double v : row) expect += v;
  }
  CHECK(surrogate_gradient(prev, batch, adv, prev_lp, 1e6).value ==
        doctest::Approx(expect / 3.0));
}

TEST_CASE("wd_score_gradient is an unbiased estimate of the mean's gradient") {
  // one-state, one-step policy: the embedding is the action itself
  const Architecture arch{1, {}, 1};
  PolicyParams p = PolicyParams::zeros(arch, std::log(0.5));
  p.theta[1] = 0.3;  // bias: the action mean
  DualPotentials pot = make_potentials(1, 1, 16, 1.0, 0.5, 0.1, 12);
  Rng init(5);
  pot.p_mu = 0.3 * init.normal_vector(16);
  pot.p_nu = 0.3 * init.normal_vector(16);
  const std::vector<Eigen::VectorXd> xs{Eigen::VectorXd::Constant(1, -0.4),
                                        Eigen::VectorXd::Constant(1, 0.8)};

  auto h = [&](double y) {
    const Eigen::VectorXd yv = Eigen::VectorXd::Constant(1, y);
    const double ly = test_fn_eval(pot, Side::Nu, yv);
    double pen = 0.0;
    for (const auto& x : xs) {
      pen += smoothing_factor(test_fn_eval(pot, Side::Mu, x), ly,
                              transport_cost(CostKind::L2, x, yv), pot.gamma)
                 .value;
    }
    return -ly - pot.gamma * pen / 2.0;
  };
  // E h(mu + 0.5 z) by trapezoid quadrature, differentiated in mu
  auto expected_h = [&](double mu) {
    const int n = 8001;
    const double lo = -9.0, step = 18.0 / (n - 1);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = lo + i * step;
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      s += w * h(mu + 0.5 * z) * std::exp(-0.5 * z * z);
    }
    return s * step / std::sqrt(2.0 * std::numbers::pi);
  };
  const double truth = (expected_h(0.3 + 1e-4) - expected_h(0.3 - 1e-4)) / 2e-4;

  Rng rng(99);
  const int batches = 2000, m = 16;
  double sum = 0.0, sq = 0.0;
  const Eigen::VectorXd s1 = Eigen::VectorXd::Ones(1);
  for (int b = 0; b < batches; ++b) {
    std::vector<Trajectory> batch(m);
    std::vector<Eigen::VectorXd> ys(m);
    for (int j = 0; j < m; ++j) {
      const Eigen::VectorXd a = sample_action(p, s1, rng);
      batch[j].states = {s1};
      batch[j].actions = {a};
      ys[j] = a;
    }
    const double g = wd_score_gradient(p, pot, xs, batch, ys, CostKind::L2)[1];
    sum += g;
    sq += g * g;
  }
  const double mean = sum / batches;
  const double se = std::sqrt((sq / batches - mean * mean) / batches);
  MESSAGE("score-function mean " << mean << " truth " << truth << " se " << se);
  // the mean baseline adds O(1/m) bias; allow it on top of 4 standard errors
  CHECK(std::abs(mean - truth) < 4.0 * se + std::abs(truth) / m);
}

TEST_CASE("probe_pathwise_gradient matches finite differences") {
  const Architecture arch{2, {5}, 2};
  const PolicyParams p = PolicyParams::random(arch, 1.0, -0.5, 31);
  DualPotentials pot = make_potentials(4, 4, 32, 1.5, 0.7, 0.1, 4);
  Rng rng(6);
  pot.p_mu = 0.4 * rng.normal_vector(32);
  pot.p_nu = 0.4 * rng.normal_vector(32);
  std::vector<Eigen::VectorXd> states, partners;
  for (int i = 0; i < 5; ++i) {
    states.push_back(rng.normal_vector(2));
    partners.push_back(rng.normal_vector(4));
  }
  for (CostKind cost : {CostKind::L2, CostKind::SquaredL2}) {
    const PathwiseGrad pg = probe_pathwise_gradient(p, pot, states, partners, cost);
    auto value = [&](const Eigen::VectorXd& th) {
      return probe_pathwise_gradient(PolicyParams{arch, th}, pot, states, partners, cost).value;
    };
    const Eigen::VectorXd fd = fd_grad(p.theta, value);
    CHECK((pg.grad - fd).norm() / fd.norm() < 1e-5);
  }
}

TEST_CASE("bgpg steps with beta = 0 take plain surrogate steps") {
  const Architecture arch{2, {4}, 2};
  const PolicyParams p = PolicyParams::random(arch, 1.0, -0.5, 13);
  RegularizedObjectiveCfg cfg;
  PgCfg pg;
  pg.trajectories = 4;
  pg.inner_steps = 3;
  pg.eta = 1e-3;
  const std::uint64_t seed = 41;

  std::vector<Trajectory> batch(pg.trajectories);
  for (int i = 0; i < pg.trajectories; ++i) {
    auto env = make_env(multigoal());
    batch[i] = rollout(*env, p, derive_seed(seed, "pg-prev", i), ActionMode::Sample);
  }
  const auto adv = batch_advantages(batch);
  std::vector<std::vector<double>> prev_lp(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].states.size(); ++t) {
      prev_lp[i].push_back(log_prob(p, batch[i].states[t], batch[i].actions[t]));
    }
  }
  PolicyParams ref = p;
  for (int l = 0; l < pg.inner_steps; ++l) {
    ref.theta += pg.eta * surrogate_gradient(ref, batch, adv, prev_lp, pg.ratio_clip).grad;
  }

  BgpgState on{p, std::nullopt, std::nullopt, 0};
  const IterationRecord r_on = bgpg_step_onpolicy(on, multigoal(), Bem{}, cfg, pg, seed);
  CHECK(same(on.params.theta, ref.theta));
  BgpgState off{p, std::nullopt, std::nullopt, 0};
  const IterationRecord r_off = bgpg_step_offpolicy(off, multigoal(), cfg, pg, seed);
  CHECK(same(off.params.theta, ref.theta));
  CHECK(r_on.mean_reward == r_off.mean_reward);
  REQUIRE(off.probe.has_value());
  CHECK(off.probe->size() > 0);
  CHECK(std::isfinite(r_on.wd_estimate));
  CHECK(std::isfinite(r_off.wd_estimate));
}

TEST_CASE("bgpg with beta != 0 moves away from the plain step") {
  const Architecture arch{2, {4}, 2};
  const PolicyParams p = PolicyParams::random(arch, 1.0, -0.5, 13);
  RegularizedObjectiveCfg cfg;
  PgCfg pg;
  pg.trajectories = 4;
  pg.inner_steps = 2;
  pg.eta = 1e-3;
  BgpgState a{p, std::nullopt, std::nullopt, 0}, b{p, std::nullopt, std::nullopt, 0};
  bgpg_step_offpolicy(a, multigoal(), cfg, pg, 3);
  cfg.beta = 1.0;
  bgpg_step_offpolicy(b, multigoal(), cfg, pg, 3);
  CHECK_FALSE(same(a.params.theta, b.params.theta));
  CHECK(b.params.theta.allFinite());
}

TEST_CASE("repulsion_step matches a straight-line reference") {
  const Architecture arch{2, {4}, 2};
  const Bem bem{BemKind::MeanXDisplacement};
  RegularizedObjectiveCfg cfg;
  cfg.beta = 5.0;
  cfg.gamma = 0.1;
  cfg.alpha_dual = 0.05;
  cfg.cost = CostKind::SquaredAbsScalar;
  cfg.dual_steps = 30;
  const int m = 6;
  const double eta = 0.05;
  const std::uint64_t seed = 71;
  const PolicyParams pa = PolicyParams::random(arch, 0.3, -0.5, 1);
  const PolicyParams pb = PolicyParams::random(arch, 0.3, -0.5, 2);

  // warm potentials so the surrogate terms are not trivial
  DualPotentials warm = make_potentials(1, 1, cfg.num_features, cfg.rff_bandwidth, cfg.gamma,
                                        cfg.alpha_dual, 5);
  Rng w(8);
  warm.p_mu = 0.2 * w.normal_vector(cfg.num_features);
  warm.p_nu = 0.2 * w.normal_vector(cfg.num_features);

  std::vector<Trajectory> ta(m), tb(m);
  std::vector<Eigen::VectorXd> xs(m), ys(m);
  for (int i = 0; i < m; ++i) {
    auto env = make_env(multigoal());
    ta[i] = rollout(*env, pa, derive_seed(seed, "rep-a", i), ActionMode::Sample);
    tb[i] = rollout(*env, pb, derive_seed(seed, "rep-b", i), ActionMode::Sample);
    xs[i] = embed_trajectory(bem, ta[i]);
    ys[i] = embed_trajectory(bem, tb[i]);
  }
  std::vector<double> ra(m), rb(m);
  for (int i = 0; i < m; ++i) {
    const double lx = test_fn_eval(warm, Side::Mu, xs[i]);
    const double ly = test_fn_eval(warm, Side::Nu, ys[i]);
    const double c = (xs[i][0] - ys[i][0]) * (xs[i][0] - ys[i][0]);
    const double f = std::exp(std::clamp((lx - ly - c) / cfg.gamma, -30.0, 30.0));
    ra[i] = ta[i].total_reward() + cfg.beta * (lx - cfg.gamma * f);
    rb[i] = tb[i].total_reward() + cfg.beta * (-ly - cfg.gamma * f);
  }
  auto step = [&](PolicyParams q, const std::vector<Trajectory>& batch,
                  const std::vector<double>& r) {
    double mean = 0.0;
    for (double v : r) mean += v / m;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean) / m;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q.theta.size());
    for (int i = 0; i < m; ++i) {
      g += ((r[i] - mean) / std::sqrt(var)) * trajectory_score(q, batch[i]);
    }
    g /= m;
    if (g.norm() > 1.0) g.normalize();
    q.theta += eta * g;
    return q;
  };
  const PolicyParams ea = step(pa, ta, ra);
  const PolicyParams eb = step(pb, tb, rb);
  const DualPotentials epot = wd_solve(EmpiricalEmbedding(xs), EmpiricalEmbedding(ys), cfg.cost,
                                       cfg.dual_steps, warm, derive_seed(seed, "dual"));

  RepulsionState st{pa, pb, warm, 0};
  const RepulsionRecord rec = repulsion_step(st, multigoal(), bem, cfg, m, eta, seed);
  CHECK((st.a.theta - ea.theta).norm() < 1e-12);
  CHECK((st.b.theta - eb.theta).norm() < 1e-12);
  CHECK((st.a.theta - pa.theta).norm() <= eta + 1e-12);
  CHECK((st.pot->p_mu - epot.p_mu).norm() < 1e-12);
  CHECK((st.pot->p_nu - epot.p_nu).norm() < 1e-12);
  double mean_x = 0.0;
  for (const auto& x : xs) mean_x += x[0] / m;
  CHECK(rec.embed_a == doctest::Approx(mean_x));
  CHECK(st.iter == 1);
}

TEST_CASE("repulsion with beta = 0 ignores the potentials") {
  const Architecture arch{2, {4}, 2};
  const Bem bem{BemKind::MeanXDisplacement};
  RegularizedObjectiveCfg cfg;
  cfg.cost = CostKind::SquaredAbsScalar;
  const PolicyParams pa = PolicyParams::random(arch, 0.3, -0.5, 1);
  const PolicyParams pb = PolicyParams::random(arch, 0.3, -0.5, 2);
  DualPotentials other = make_potentials(1, 1, cfg.num_features, 1.0, cfg.gamma, 1.0, 5);
  other.p_mu.setConstant(3.0);
  RepulsionState s1{pa, pb, std::nullopt, 0};
  RepulsionState s2{pa, pb, other, 0};
  repulsion_step(s1, multigoal(), bem, cfg, 6, 0.05, 9);
  repulsion_step(s2, multigoal(), bem, cfg, 6, 0.05, 9);
  CHECK(same(s1.a.theta, s2.a.theta));
  CHECK(same(s1.b.theta, s2.b.theta));
}
