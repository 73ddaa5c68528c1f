#include "bgrl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "bgrl/error.hpp"
#include "bgrl/policy.hpp"
#include "bgrl/rng.hpp"
#include "bgrl/tabular.hpp"
#include "bgrl/transport.hpp"

namespace bgrl {

namespace {

std::string format(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  return buf;
}

std::vector<Eigen::VectorXd> cloud(int n, int d, double shift, Rng& rng) {
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = rng.normal_vector(d);
    x[0] += shift;
    pts.push_back(x);
  }
  return pts;
}

double brute_force_assignment(const std::vector<Eigen::VectorXd>& a,
                              const std::vector<Eigen::VectorXd>& b, CostKind cost) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += transport_cost(cost, a[i], b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

template <typename F>
Eigen::VectorXd central_difference(F&& f, Eigen::VectorXd x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

PolicyParams random_policy(Rng& rng, int in, int out) {
  Architecture arch{in, {5, 5}, out};
  PolicyParams p = PolicyParams::random(arch, 1.0, 0.0, rng.next_u64());
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta[i] += 0.1 * rng.normal();
  return p;
}

}  // namespace

void SuiteReport::record(bool pass, const std::string& line) {
  (pass ? passed : failed) += 1;
  lines.push_back(std::string(pass ? "PASS " : "FAIL ") + line);
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

SuiteReport verify_transport(int pairs, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "transport";
  for (int i = 0; i < pairs; ++i) {
    Rng rng(derive_seed(seed, "transport-pair", i));
    const auto a = cloud(32, 2, 0.0, rng);
    const auto b = cloud(32, 2, 0.5 + rng.uniform(), rng);
    const EmpiricalEmbedding ea(a);
    const EmpiricalEmbedding eb(b);
    const double exact = exact_ot_discrete(ea, eb, CostKind::L2).value;
    // gamma = 1e-3 does not reach the 1e-9 marginal tolerance in this
    // budget; the value check is what matters here
    const SinkhornResult sk = sinkhorn_oracle(ea, eb, CostKind::L2, 1e-3, 5000);
    const double rel = std::abs(sk.value - exact) / exact;
    rep.record(rel <= 0.02, "pair " + std::to_string(i) +
                                format(": exact %.6f sinkhorn %.6f rel %.2e", exact, sk.value, rel) +
                                format(" marginal error %.1e", sk.marginal_error));
  }
  for (int n = 1; n <= 6; ++n) {
    for (int rep_i = 0; rep_i < 3; ++rep_i) {
      Rng rng(derive_seed(seed, "transport-brute", n * 10 + rep_i));
      const auto a = cloud(n, 2, 0.0, rng);
      const auto b = cloud(n, 2, 1.0, rng);
      const double hung = exact_emd_assignment(a, b, CostKind::L2);
      const double brute = brute_force_assignment(a, b, CostKind::L2);
      rep.record(hung == brute, "assignment n=" + std::to_string(n) +
                                    format(": hungarian %.17g brute %.17g", hung, brute));
    }
  }
  return rep;
}

SuiteReport verify_theorem1(int instances, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "theorem1";
  int bound_ok = 0;
  int visit_ok = 0;
  double min_slack = INFINITY;
  for (int i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, "theorem1", i));
    const int layer = 1 + static_cast<int>(rng.index(4));
    const int actions = 1 + static_cast<int>(rng.index(2));
    const int horizon = static_cast<int>(rng.index(4));
    const TabularMDP mdp = random_layered_mdp(layer, actions, horizon, rng.next_u64());
    const Eigen::MatrixXd pi = random_tabular_policy(mdp.num_states, actions, rng.next_u64());
    const Eigen::MatrixXd other = random_tabular_policy(mdp.num_states, actions, rng.next_u64());
    const double w = rng.uniform();
    const Eigen::MatrixXd pi_tilde = (1.0 - w) * pi + w * other;
    const double wd0 = exact_count_wd0(mdp, pi, pi_tilde, CountEmbedding::StateVisit);
    const ImprovementReport r = verify_policy_improvement(mdp, pi, pi_tilde, wd0);
    bound_ok += r.holds ? 1 : 0;
    visit_ok += r.visit_bound_holds ? 1 : 0;
    min_slack = std::min(min_slack, r.slack);
    if (!r.holds || !r.visit_bound_holds) {
      rep.lines.push_back("instance " + std::to_string(i) +
                          format(": slack %.3e visit_l1 %.6f wd0 %.6f", r.slack, r.visit_l1, wd0));
    }
  }
  rep.record(bound_ok == instances,
             "improvement bound " + std::to_string(bound_ok) + "/" + std::to_string(instances) +
                 format(" (min slack %.3e)", min_slack));
  rep.record(visit_ok == instances, "visitation bound " + std::to_string(visit_ok) + "/" +
                                        std::to_string(instances));
  return rep;
}

SuiteReport verify_lemma_equality(int pairs, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "lemma-equality";
  int zero_ok = 0;
  int positive_ok = 0;
  double min_positive = INFINITY;
  for (int i = 0; i < pairs; ++i) {
    Rng rng(derive_seed(seed, "lemma", i));
    const int layer = 1 + static_cast<int>(rng.index(3));
    const int horizon = static_cast<int>(rng.index(3));
    const TabularMDP mdp = random_layered_mdp(layer, 2, horizon, rng.next_u64());
    const Eigen::MatrixXd pi = random_tabular_policy(mdp.num_states, 2, rng.next_u64());
    const Eigen::MatrixXd same = pi;
    const double wd_same = exact_count_wd0(mdp, pi, same, CountEmbedding::StateAction);
    const bool equal = (pi - same).cwiseAbs().maxCoeff() <= 1e-9;
    zero_ok += (wd_same == 0.0 && equal) ? 1 : 0;

    // move probability mass between the two actions at a first-layer state
    Eigen::MatrixXd moved = pi;
    const int s = static_cast<int>(rng.index(static_cast<std::size_t>(layer)));
    const double delta = (0.1 + 0.4 * rng.uniform()) * (pi(s, 0) > pi(s, 1) ? -pi(s, 0) : pi(s, 1));
    moved(s, 0) += delta;
    moved(s, 1) -= delta;
    const double wd_moved = exact_count_wd0(mdp, pi, moved, CountEmbedding::StateAction);
    positive_ok += wd_moved > 0.0 ? 1 : 0;
    min_positive = std::min(min_positive, wd_moved);
  }
  rep.record(zero_ok == pairs, "equal policies give WD_0 = 0: " + std::to_string(zero_ok) + "/" +
                                   std::to_string(pairs));
  rep.record(positive_ok == pairs, "perturbed policies give WD_0 > 0: " +
                                       std::to_string(positive_ok) + "/" + std::to_string(pairs) +
                                       format(" (min %.3e)", min_positive));
  return rep;
}

SuiteReport verify_gradients(int instances, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "gradients";
  constexpr double kTol = 1e-4;
  constexpr double kH = 1e-5;

  double worst = 0.0;
  int ok = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, "grad-logprob", i));
    PolicyParams p = random_policy(rng, 3, 2);
    for (Eigen::Index j = 0; j < 2; ++j) p.theta[p.theta.size() - 2 + j] = 0.3 * rng.normal();
    const Eigen::VectorXd s = rng.normal_vector(3);
    const Eigen::VectorXd a = rng.normal_vector(2);
    const Eigen::VectorXd g = log_prob_grad(p, s, a).grad;
    const Eigen::VectorXd fd = central_difference(
        [&](const Eigen::VectorXd& th) { return log_prob(PolicyParams{p.arch, th}, s, a); },
        p.theta, kH);
    const double e = relative_error(g, fd);
    worst = std::max(worst, e);
    ok += e <= kTol ? 1 : 0;
  }
  rep.record(ok == instances, "log_prob_grad " + std::to_string(ok) + "/" +
                                  std::to_string(instances) + format(" (worst %.2e)", worst));

  worst = 0.0;
  ok = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, "grad-pathwise", i));
    const PolicyParams p = random_policy(rng, 3, 2);
    const FeatureMap map(5, 50, 1.0, rng.next_u64());
    const Eigen::VectorXd coef = rng.normal_vector(50);
    const Eigen::VectorXd s = rng.normal_vector(3);
    const Eigen::VectorXd eps = rng.normal_vector(2);
    auto lambda = [&](const PolicyParams& q) {
      Eigen::VectorXd z(5);
      z << s, reparam_action(q, s, eps);
      return coef.dot(map.eval(z));
    };
    Eigen::VectorXd z(5);
    z << s, reparam_action(p, s, eps);
    const Eigen::VectorXd dz = map.gradient_of(coef, z);
    const Eigen::VectorXd g = reparam_action_grad(p, s, eps, dz.tail(2)).vjp;
    const Eigen::VectorXd fd = central_difference(
        [&](const Eigen::VectorXd& th) { return lambda(PolicyParams{p.arch, th}); }, p.theta, kH);
    const double e = relative_error(g, fd);
    worst = std::max(worst, e);
    ok += e <= kTol ? 1 : 0;
  }
  rep.record(ok == instances, "pathwise lambda(s, pi(s)) " + std::to_string(ok) + "/" +
                                  std::to_string(instances) + format(" (worst %.2e)", worst));

  worst = 0.0;
  ok = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, "grad-dual", i));
    const double gamma = 0.2 + rng.uniform();
    DualPotentials pot = make_potentials(2, 2, 20, 1.0, gamma, 0.5, rng.next_u64());
    pot.p_mu = 0.3 * rng.normal_vector(20);
    pot.p_nu = 0.3 * rng.normal_vector(20);
    pot.t = static_cast<std::int64_t>(rng.index(100));
    const Eigen::VectorXd x = rng.normal_vector(2);
    const Eigen::VectorXd y = rng.normal_vector(2);
    const int m = 20;
    auto psi = [&](const Eigen::VectorXd& pq) {
      const double lx = pq.head(m).dot(pot.map_mu->eval(x));
      const double ly = pq.tail(m).dot(pot.map_nu->eval(y));
      return lx - ly - gamma * std::exp((lx - ly - transport_cost(CostKind::L2, x, y)) / gamma);
    };
    Eigen::VectorXd pq(2 * m);
    pq << pot.p_mu, pot.p_nu;
    const double step = pot.alpha / std::sqrt(static_cast<double>(pot.t) + 1.0);
    DualPotentials after = pot;
    wd_sgd_step(after, x, y, CostKind::L2);
    Eigen::VectorXd dir(2 * m);
    dir << (after.p_mu - pot.p_mu) / step, (after.p_nu - pot.p_nu) / step;
    const Eigen::VectorXd fd = central_difference(psi, pq, kH);
    const double e = relative_error(dir, fd);
    worst = std::max(worst, e);
    ok += e <= kTol ? 1 : 0;
  }
  rep.record(ok == instances, "dual SGD direction " + std::to_string(ok) + "/" +
                                  std::to_string(instances) + format(" (worst %.2e)", worst));
  return rep;
}

SuiteReport run_suite(std::string_view name) {
  if (name == "transport") return verify_transport();
  if (name == "theorem1") return verify_theorem1();
  if (name == "lemma-equality") return verify_lemma_equality();
  if (name == "gradients") return verify_gradients();
  throw Error("unknown suite '" + std::string(name) +
              "' (expected transport, theorem1, lemma-equality, gradients)");
}

}  // namespace bgrl
