#include "bgrl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bgrl/error.hpp"

namespace bgrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_same_dim(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw DimensionError("cost: point dimensions differ (" +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

double transport_cost(CostKind kind, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y) {
  check_same_dim(x, y);
  switch (kind) {
    case CostKind::L1:
      return (x - y).lpNorm<1>();
    case CostKind::L2:
      return (x - y).norm();
    case CostKind::SquaredL2:
      return (x - y).squaredNorm();
    case CostKind::SquaredAbsScalar:
      require_dim(x.size() == 1, "SquaredAbsScalar cost needs scalar points");
      return (x[0] - y[0]) * (x[0] - y[0]);
  }
  throw Error("unknown cost kind");
}

Eigen::VectorXd transport_cost_grad_x(CostKind kind, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y) {
  check_same_dim(x, y);
  const Eigen::VectorXd d = x - y;
  switch (kind) {
    case CostKind::L1:
      return d.unaryExpr([](double v) {
        return static_cast<double>((v > 0.0) - (v < 0.0));
      });
    case CostKind::L2: {
      const double n = d.norm();
      if (n == 0.0) return Eigen::VectorXd::Zero(d.size());
      return d / n;
    }
    case CostKind::SquaredL2:
    case CostKind::SquaredAbsScalar:
      return 2.0 * d;
  }
  throw Error("unknown cost kind");
}

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::L1:
      return "l1";
    case CostKind::L2:
      return "l2";
    case CostKind::SquaredL2:
      return "sql2";
    case CostKind::SquaredAbsScalar:
      return "sqabs";
  }
  return "?";
}

CostKind parse_cost_kind(std::string_view name) {
  if (name == "l1") return CostKind::L1;
  if (name == "l2") return CostKind::L2;
  if (name == "sql2") return CostKind::SquaredL2;
  if (name == "sqabs") return CostKind::SquaredAbsScalar;
  throw Error("unknown cost '" + std::string(name) +
              "' (expected l1, l2, sql2 or sqabs)");
}

Eigen::MatrixXd cost_matrix(CostKind kind,
                            std::span<const Eigen::VectorXd> xs,
                            std::span<const Eigen::VectorXd> ys) {
  Eigen::MatrixXd c(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      c(i, j) = transport_cost(kind, xs[i], ys[j]);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

EmpiricalEmbedding::EmpiricalEmbedding(std::vector<Eigen::VectorXd> points)
    : points_(std::move(points)) {
  require(!points_.empty(), "EmpiricalEmbedding: no points");
  weights_.assign(points_.size(), 1.0 / static_cast<double>(points_.size()));
  finalize();
}

EmpiricalEmbedding::EmpiricalEmbedding(std::vector<Eigen::VectorXd> points,
                                       std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  require(!points_.empty(), "EmpiricalEmbedding: no points");
  require_dim(points_.size() == weights_.size(),
              "EmpiricalEmbedding: points and weights differ in length");
  double total = 0.0;
  for (double w : weights_) {
    require(w >= 0.0 && std::isfinite(w),
            "EmpiricalEmbedding: weights must be finite and nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9,
          "EmpiricalEmbedding: weights must sum to 1");
  for (double& w : weights_) w /= total;
  finalize();
}

void EmpiricalEmbedding::finalize() {
  const auto d = points_.front().size();
  for (const auto& p : points_) {
    require_dim(p.size() == d, "EmpiricalEmbedding: mixed point dimensions");
  }
  cdf_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cdf_.begin());
}

EmpiricalEmbedding EmpiricalEmbedding::merged(
    std::vector<Eigen::VectorXd> points, std::vector<double> weights) {
  require(!points.empty(), "EmpiricalEmbedding: no points");
  if (weights.empty()) {
    weights.assign(points.size(), 1.0);
  }
  require_dim(points.size() == weights.size(),
              "EmpiricalEmbedding: points and weights differ in length");
  const auto d = points.front().size();
  for (const auto& p : points) {
    require_dim(p.size() == d, "EmpiricalEmbedding: mixed point dimensions");
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t i, std::size_t j) {
    return std::lexicographical_compare(points[i].begin(), points[i].end(),
                                        points[j].begin(), points[j].end());
  };
  std::stable_sort(order.begin(), order.end(), less);

  std::vector<Eigen::VectorXd> out_points;
  std::vector<double> out_weights;
  double total = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    total += weights[i];
    if (!out_points.empty() && out_points.back() == points[i]) {
      out_weights.back() += weights[i];
    } else {
      out_points.push_back(points[i]);
      out_weights.push_back(weights[i]);
    }
  }
  require(total > 0.0, "EmpiricalEmbedding: total weight is zero");
  for (double& w : out_weights) w /= total;
  EmpiricalEmbedding e;
  e.points_ = std::move(out_points);
  e.weights_ = std::move(out_weights);
  e.finalize();
  return e;
}

int EmpiricalEmbedding::dim() const {
  require(!points_.empty(), "EmpiricalEmbedding: empty");
  return static_cast<int>(points_.front().size());
}

Eigen::VectorXd EmpiricalEmbedding::weight_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(weights_.data(),
                                           static_cast<Eigen::Index>(weights_.size()));
}

const Eigen::VectorXd& EmpiricalEmbedding::sample(Rng& rng) const {
  require(!points_.empty(), "EmpiricalEmbedding: cannot sample from empty set");
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto i = std::min<std::size_t>(it - cdf_.begin(), points_.size() - 1);
  return points_[i];
}

Sampler make_sampler(EmpiricalEmbedding embedding) {
  auto shared = std::make_shared<const EmpiricalEmbedding>(std::move(embedding));
  return [shared](Rng& rng) -> Eigen::VectorXd { return shared->sample(rng); };
}

// ---------------------------------------------------------------------------

ClampedExp clamped_exp(double argument) {
  if (std::isnan(argument)) throw Error("dual solver: NaN exponent");
  if (argument > kExponentClamp) return {std::exp(kExponentClamp), true};
  if (argument < -kExponentClamp) return {std::exp(-kExponentClamp), true};
  return {std::exp(argument), false};
}

DualPotentials::DualPotentials(std::shared_ptr<const FeatureMap> mu_map,
                               std::shared_ptr<const FeatureMap> nu_map,
                               double gamma_, double alpha_)
    : map_mu(std::move(mu_map)),
      map_nu(std::move(nu_map)),
      gamma(gamma_),
      alpha(alpha_) {
  require(map_mu && map_nu, "DualPotentials: feature maps required");
  require(gamma > 0.0 && std::isfinite(gamma),
          "smoothed solver requires gamma > 0");
  require(alpha > 0.0 && std::isfinite(alpha),
          "DualPotentials: step scale alpha must be positive");
  p_mu = Eigen::VectorXd::Zero(map_mu->num_features());
  p_nu = Eigen::VectorXd::Zero(map_nu->num_features());
}

double test_fn_eval(const DualPotentials& pot, Side side,
                    const Eigen::VectorXd& x) {
  return pot.coefficients(side).dot(pot.map(side).eval(x));
}

ClampedExp smoothing_factor(double lambda_mu, double lambda_nu, double cost,
                            double gamma) {
  return clamped_exp((lambda_mu - lambda_nu - cost) / gamma);
}

void wd_sgd_step(DualPotentials& pot, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y, CostKind cost) {
  require(pot.gamma > 0.0, "smoothed solver requires gamma > 0");
  const Eigen::VectorXd phi_x = pot.map_mu->eval(x);
  const Eigen::VectorXd phi_y = pot.map_nu->eval(y);
  const ClampedExp f = smoothing_factor(pot.p_mu.dot(phi_x), pot.p_nu.dot(phi_y),
                                        transport_cost(cost, x, y), pot.gamma);
  if (f.saturated) ++pot.saturations;
  const double step =
      pot.alpha / std::sqrt(static_cast<double>(pot.t + 1)) * (1.0 - f.value);
  pot.p_mu.noalias() += step * phi_x;
  pot.p_nu.noalias() -= step * phi_y;
  ++pot.t;
}

DualPotentials wd_solve(const Sampler& mu, const Sampler& nu, CostKind cost,
                        int iterations, DualPotentials init,
                        std::uint64_t seed) {
  require(iterations >= 1, "wd_solve: iterations must be >= 1");
  Rng rng(seed);
  for (int i = 0; i < iterations; ++i) {
    const Eigen::VectorXd x = mu(rng);
    const Eigen::VectorXd y = nu(rng);
    wd_sgd_step(init, x, y, cost);
  }
  return init;
}

DualPotentials wd_solve(const EmpiricalEmbedding& mu,
                        const EmpiricalEmbedding& nu, CostKind cost,
                        int iterations, DualPotentials init,
                        std::uint64_t seed) {
  require(!mu.empty() && !nu.empty(), "wd_solve: empty distribution");
  require(iterations >= 1, "wd_solve: iterations must be >= 1");
  Rng rng(seed);
  for (int i = 0; i < iterations; ++i) {
    const Eigen::VectorXd& x = mu.sample(rng);
    const Eigen::VectorXd& y = nu.sample(rng);
    wd_sgd_step(init, x, y, cost);
  }
  return init;
}

DualPotentials make_potentials(int dim_mu, int dim_nu, int num_features,
                               double rff_bandwidth, double gamma,
                               double alpha, std::uint64_t seed) {
  auto mu = std::make_shared<const FeatureMap>(
      dim_mu, num_features, rff_bandwidth, derive_seed(seed, "rff-mu"));
  auto nu = std::make_shared<const FeatureMap>(
      dim_nu, num_features, rff_bandwidth, derive_seed(seed, "rff-nu"));
  return DualPotentials(std::move(mu), std::move(nu), gamma, alpha);
}

double dual_objective(const DualPotentials& pot,
                      std::span<const Eigen::VectorXd> xs,
                      std::span<const Eigen::VectorXd> ys, CostKind cost) {
  require(!xs.empty(), "dual_objective: need at least one sample pair");
  require_dim(xs.size() == ys.size(),
              "dual_objective: xs and ys must pair up");
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lm = test_fn_eval(pot, Side::Mu, xs[i]);
    const double ln = test_fn_eval(pot, Side::Nu, ys[i]);
    const ClampedExp f =
        smoothing_factor(lm, ln, transport_cost(cost, xs[i], ys[i]), pot.gamma);
    total += lm - ln - pot.gamma * f.value;
  }
  return total / static_cast<double>(xs.size());
}

double dual_objective_exact(const DualPotentials& pot,
                            const EmpiricalEmbedding& mu,
                            const EmpiricalEmbedding& nu, CostKind cost) {
  const auto& xs = mu.points();
  const auto& ys = nu.points();
  std::vector<double> lm(xs.size()), ln(ys.size());
  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lm[i] = test_fn_eval(pot, Side::Mu, xs[i]);
    first += mu.weights()[i] * lm[i];
  }
  for (std::size_t j = 0; j < ys.size(); ++j) {
    ln[j] = test_fn_eval(pot, Side::Nu, ys[j]);
    second += nu.weights()[j] * ln[j];
  }
  double penalty = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const ClampedExp f = smoothing_factor(
          lm[i], ln[j], transport_cost(cost, xs[i], ys[j]), pot.gamma);
      penalty += mu.weights()[i] * nu.weights()[j] * f.value;
    }
  }
  return first - second - pot.gamma * penalty;
}

double wd_estimate(const DualPotentials& pot,
                   std::span<const Eigen::VectorXd> xs,
                   std::span<const Eigen::VectorXd> ys, CostKind cost) {
  return dual_objective(pot, xs, ys, cost) + pot.gamma;
}

double wd_estimate_exact(const DualPotentials& pot,
                         const EmpiricalEmbedding& mu,
                         const EmpiricalEmbedding& nu, CostKind cost) {
  return dual_objective_exact(pot, mu, nu, cost) + pot.gamma;
}

// ---------------------------------------------------------------------------

DampingSpec::Kind select_damping(bool discrete_space) {
  return discrete_space ? DampingSpec::Kind::UniformDiscrete
                        : DampingSpec::Kind::ProductMeasure;
}

double damping_penalty(const DualPotentials& pot, const DampingSpec& spec,
                       CostKind cost) {
  require(pot.gamma > 0.0, "smoothed solver requires gamma > 0");
  if (spec.kind == DampingSpec::Kind::ProductMeasure) {
    require(!spec.xs.empty(), "damping_penalty: no product samples");
    require_dim(spec.xs.size() == spec.ys.size(),
                "damping_penalty: xs and ys must pair up");
    double total = 0.0;
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
      total += smoothing_factor(test_fn_eval(pot, Side::Mu, spec.xs[i]),
                                test_fn_eval(pot, Side::Nu, spec.ys[i]),
                                transport_cost(cost, spec.xs[i], spec.ys[i]),
                                pot.gamma)
                   .value;
    }
    return pot.gamma * total / static_cast<double>(spec.xs.size());
  }
  require(!spec.space.empty(), "damping_penalty: empty enumeration");
  const auto n = spec.space.size();
  std::vector<double> lm(n), ln(n);
  for (std::size_t i = 0; i < n; ++i) {
    lm[i] = test_fn_eval(pot, Side::Mu, spec.space[i]);
    ln[i] = test_fn_eval(pot, Side::Nu, spec.space[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      total += smoothing_factor(lm[i], ln[j],
                                transport_cost(cost, spec.space[i], spec.space[j]),
                                pot.gamma)
                   .value;
    }
  }
  return pot.gamma * total / static_cast<double>(n * n);
}

// ---------------------------------------------------------------------------

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  require_dim(cost.cols() == cost.rows(), "assignment: cost must be square");
  // 1-based potentials formulation; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

double exact_emd_assignment(std::span<const Eigen::VectorXd> a,
                            std::span<const Eigen::VectorXd> b, CostKind cost) {
  require(!a.empty(), "exact_emd_assignment: empty point set");
  require(a.size() == b.size(),
          "exact_emd_assignment: sizes differ; use exact_ot_discrete");
  const Eigen::MatrixXd c = cost_matrix(cost, a, b);
  const auto perm = solve_assignment(c);
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += c(i, perm[i]);
  return total / static_cast<double>(a.size());
}

TransportPlan min_cost_transport(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b,
                                 const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  require(n >= 1 && m >= 1, "min_cost_transport: empty marginal");
  require_dim(cost.rows() == n && cost.cols() == m,
              "min_cost_transport: cost shape mismatch");
  constexpr double kFlowTol = 1e-14;

  Eigen::VectorXd supply = a / a.sum();
  Eigen::VectorXd demand = b / b.sum();
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(n, m);

  // Nodes: [0, n) sources, [n, n + m) sinks, n + m super-source,
  // n + m + 1 super-sink.
  const int src = n + m;
  const int dst = n + m + 1;
  const int nodes = n + m + 2;
  std::vector<double> pot(nodes, 0.0), dist(nodes);
  std::vector<int> parent(nodes);
  std::vector<char> done(nodes);
  for (int j = 0; j < m; ++j) pot[n + j] = cost.col(j).minCoeff();
  pot[dst] = *std::min_element(pot.begin() + n, pot.begin() + n + m);

  for (int round = 0; round < 8 * (n + m) + 64; ++round) {
    if (supply.sum() <= kFlowTol || demand.sum() <= kFlowTol) break;
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    dist[src] = 0.0;
    auto relax = [&](int from, int to, double reduced) {
      const double cand = dist[from] + std::max(0.0, reduced);
      if (cand < dist[to]) {
        dist[to] = cand;
        parent[to] = from;
      }
    };
    while (true) {
      int u = -1;
      for (int v = 0; v < nodes; ++v) {
        if (!done[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = v;
      }
      if (u < 0 || u == dst) break;
      done[u] = 1;
      if (u == src) {
        for (int i = 0; i < n; ++i) {
          if (supply[i] > kFlowTol) relax(src, i, pot[src] - pot[i]);
        }
      } else if (u < n) {
        for (int j = 0; j < m; ++j) {
          if (!done[n + j]) relax(u, n + j, cost(u, j) + pot[u] - pot[n + j]);
        }
      } else {
        const int j = u - n;
        for (int i = 0; i < n; ++i) {
          if (!done[i] && flow(i, j) > kFlowTol) {
            relax(u, i, -cost(i, j) + pot[u] - pot[i]);
          }
        }
        if (demand[j] > kFlowTol) relax(u, dst, pot[u] - pot[dst]);
      }
    }
    if (dist[dst] == kInf) break;
    const double reach = dist[dst];
    for (int v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], reach);

    // bottleneck along the path
    double amount = kInf;
    int v = dst;
    while (v != src) {
      const int u = parent[v];
      if (u == src) {
        amount = std::min(amount, supply[v]);
      } else if (v == dst) {
        amount = std::min(amount, demand[u - n]);
      } else if (u >= n && v < n) {
        amount = std::min(amount, flow(v, u - n));
      }
      v = u;
    }
    v = dst;
    while (v != src) {
      const int u = parent[v];
      if (u == src) {
        supply[v] -= amount;
      } else if (v == dst) {
        demand[u - n] -= amount;
      } else if (u < n) {
        flow(u, v - n) += amount;
      } else {
        flow(v, u - n) -= amount;
      }
      v = u;
    }
  }
  TransportPlan out;
  out.plan = flow;
  out.value = (flow.array() * cost.array()).sum();
  return out;
}

TransportPlan exact_ot_discrete(const EmpiricalEmbedding& a,
                                const EmpiricalEmbedding& b, CostKind cost) {
  require(!a.empty() && !b.empty(), "exact_ot_discrete: empty distribution");
  if (a.size() > kMaxExactSupport || b.size() > kMaxExactSupport) {
    throw Error("exact_ot_discrete: support larger than " +
                std::to_string(kMaxExactSupport) +
                " points; use sinkhorn_oracle instead");
  }
  const Eigen::MatrixXd c = cost_matrix(cost, a.points(), b.points());
  return min_cost_transport(a.weight_vector(), b.weight_vector(), c);
}

SinkhornResult sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        const Eigen::MatrixXd& cost, double gamma,
                        int max_iterations, double tolerance) {
  require(gamma > 0.0, "sinkhorn: gamma must be positive");
  require(max_iterations >= 1, "sinkhorn: max_iterations must be >= 1");
  const auto n = a.size();
  const auto m = b.size();
  require_dim(cost.rows() == n && cost.cols() == m, "sinkhorn: cost shape");
  const Eigen::ArrayXd log_a = a.array().log();
  const Eigen::ArrayXd log_b = b.array().log();
  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(m);

  auto plan_for = [&](double eps) {
    Eigen::MatrixXd p(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        p(i, j) =
            std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost(i, j)) / eps);
      }
    }
    return p;
  };
  // Row-major copy so both half-sweeps read contiguous memory.
  const Eigen::MatrixXd cost_t = cost.transpose();
  std::vector<double> buf(static_cast<std::size_t>(std::max(n, m)));
  // -eps * log sum_k exp(log_w[k] + (pot[k] - c[k]) / eps)
  auto soft_min = [&](const Eigen::ArrayXd& log_w, const Eigen::ArrayXd& pot,
                      const double* c, Eigen::Index len, double eps) {
    double hi = -kInf;
    for (Eigen::Index k = 0; k < len; ++k) {
      buf[k] = log_w[k] + (pot[k] - c[k]) / eps;
      hi = std::max(hi, buf[k]);
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < len; ++k) s += std::exp(buf[k] - hi);
    return -eps * (hi + std::log(s));
  };
  auto sweep = [&](double eps) {
    for (Eigen::Index i = 0; i < n; ++i) {
      f[i] = soft_min(log_b, g, cost_t.col(i).data(), m, eps);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      g[j] = soft_min(log_a, f, cost.col(j).data(), n, eps);
    }
  };
  auto row_error = [&](double eps) {
    // columns are exact after the g half-sweep
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double fi = soft_min(log_b, g, cost_t.col(i).data(), m, eps);
      err += std::abs(a[i] * (std::exp((f[i] - fi) / eps) - 1.0));
    }
    return err;
  };

  SinkhornResult out;
  const double scale = std::max(cost.maxCoeff(), gamma);
  double eps = scale;
  int used = 0;
  // anneal: halve eps until it reaches gamma, a few sweeps per stage
  while (eps > gamma && used < max_iterations) {
    for (int k = 0; k < 20 && used < max_iterations; ++k, ++used) sweep(eps);
    eps = std::max(gamma, eps * 0.5);
  }
  eps = gamma;
  double err = kInf;
  while (used < max_iterations) {
    sweep(eps);
    ++used;
    if (used % 10 == 0 || used == max_iterations) {
      err = row_error(eps);
      if (err < tolerance) break;
    }
  }
  err = row_error(eps);
  out.plan = plan_for(gamma);
  out.iterations = used;
  out.marginal_error = err;
  out.converged = err < tolerance;
  out.transport_cost = (out.plan.array() * cost.array()).sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double p = out.plan(i, j);
      if (p > 0.0) kl += p * std::log(p / (a[i] * b[j]));
    }
  }
  out.kl = kl;
  out.value = out.transport_cost + gamma * kl;
  return out;
}

SinkhornResult sinkhorn_oracle(const EmpiricalEmbedding& a,
                               const EmpiricalEmbedding& b, CostKind cost,
                               double gamma, int max_iterations) {
  require(!a.empty() && !b.empty(), "sinkhorn_oracle: empty distribution");
  const Eigen::MatrixXd c = cost_matrix(cost, a.points(), b.points());
  return sinkhorn(a.weight_vector(), b.weight_vector(), c, gamma,
                  max_iterations);
}

}  // namespace bgrl
