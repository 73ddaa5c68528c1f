#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "bgrl/rff.hpp"
#include "bgrl/rng.hpp"

namespace bgrl {

// ---------------------------------------------------------------------------
// Costs on embedding points.

enum class CostKind { L1, L2, SquaredL2, SquaredAbsScalar };

double transport_cost(CostKind kind, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y);

// d C(x, y) / d x. For L1/L2 the subgradient 0 is used at the kinks.
Eigen::VectorXd transport_cost_grad_x(CostKind kind, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y);

std::string_view to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view name);

Eigen::MatrixXd cost_matrix(CostKind kind,
                            std::span<const Eigen::VectorXd> xs,
                            std::span<const Eigen::VectorXd> ys);

// ---------------------------------------------------------------------------
// Weighted finite point set; the empirical stand-in for a policy embedding.

class EmpiricalEmbedding {
 public:
  EmpiricalEmbedding() = default;
  // Uniform weights.
  explicit EmpiricalEmbedding(std::vector<Eigen::VectorXd> points);
  // Weights are renormalized; they must already sum to 1 within 1e-9.
  EmpiricalEmbedding(std::vector<Eigen::VectorXd> points,
                     std::vector<double> weights);

  // Bitwise-equal points are merged and their weights summed. Weights
  // default to uniform and are normalized.
  static EmpiricalEmbedding merged(std::vector<Eigen::VectorXd> points,
                                   std::vector<double> weights = {});

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int dim() const;
  const std::vector<Eigen::VectorXd>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  Eigen::VectorXd weight_vector() const;

  const Eigen::VectorXd& sample(Rng& rng) const;

 private:
  void finalize();

  std::vector<Eigen::VectorXd> points_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

using Sampler = std::function<Eigen::VectorXd(Rng&)>;

Sampler make_sampler(EmpiricalEmbedding embedding);

// ---------------------------------------------------------------------------
// Dual potentials lambda(x) = <p, phi(x)> and the stochastic dual solver.

enum class Side { Mu, Nu };

// exp arguments are clamped to [-kExponentClamp, kExponentClamp].
inline constexpr double kExponentClamp = 30.0;

struct ClampedExp {
  double value;
  bool saturated;
};
ClampedExp clamped_exp(double argument);

struct DualPotentials {
  DualPotentials(std::shared_ptr<const FeatureMap> mu_map,
                 std::shared_ptr<const FeatureMap> nu_map, double gamma,
                 double alpha);

  std::shared_ptr<const FeatureMap> map_mu;
  std::shared_ptr<const FeatureMap> map_nu;
  Eigen::VectorXd p_mu;
  Eigen::VectorXd p_nu;
  double gamma;
  double alpha;
  // number of SGD steps applied so far
  std::int64_t t = 0;
  // number of clamped exponentials seen by steps and estimates
  std::int64_t saturations = 0;

  const FeatureMap& map(Side side) const {
    return side == Side::Mu ? *map_mu : *map_nu;
  }
  const Eigen::VectorXd& coefficients(Side side) const {
    return side == Side::Mu ? p_mu : p_nu;
  }
};

// <p_side, phi_side(x)>
double test_fn_eval(const DualPotentials& pot, Side side,
                    const Eigen::VectorXd& x);

// The smoothing factor F = exp((lambda_mu(x) - lambda_nu(y) - C(x,y)) / gamma)
// for precomputed lambda values.
ClampedExp smoothing_factor(double lambda_mu, double lambda_nu, double cost,
                            double gamma);

// One ascent step on the single-sample dual objective with step
// alpha / sqrt(t + 1):
//   p_mu += step (1 - F) phi_mu(x),  p_nu -= step (1 - F) phi_nu(y).
void wd_sgd_step(DualPotentials& pot, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y, CostKind cost);

// Runs `iterations` steps on fresh draws (x, y) ~ mu x nu, starting from
// `init` (warm start). Deterministic given seed.
DualPotentials wd_solve(const Sampler& mu, const Sampler& nu, CostKind cost,
                        int iterations, DualPotentials init,
                        std::uint64_t seed);
DualPotentials wd_solve(const EmpiricalEmbedding& mu,
                        const EmpiricalEmbedding& nu, CostKind cost,
                        int iterations, DualPotentials init,
                        std::uint64_t seed);

// Fresh zero potentials with maps of `num_features` features and bandwidth
// `rff_bandwidth`; the two maps use seeds derived from `seed`.
DualPotentials make_potentials(int dim_mu, int dim_nu, int num_features,
                               double rff_bandwidth, double gamma,
                               double alpha, std::uint64_t seed);

// Sampled dual objective: mean_i lambda_mu(x_i) - lambda_nu(y_i)
//   - gamma F(x_i, y_i). Its maximum over potentials is WD_gamma - gamma.
double dual_objective(const DualPotentials& pot,
                      std::span<const Eigen::VectorXd> xs,
                      std::span<const Eigen::VectorXd> ys, CostKind cost);

// Same objective with exact expectations over two weighted point sets.
double dual_objective_exact(const DualPotentials& pot,
                            const EmpiricalEmbedding& mu,
                            const EmpiricalEmbedding& nu, CostKind cost);

// Estimate of WD_gamma: dual_objective + gamma.
double wd_estimate(const DualPotentials& pot,
                   std::span<const Eigen::VectorXd> xs,
                   std::span<const Eigen::VectorXd> ys, CostKind cost);
double wd_estimate_exact(const DualPotentials& pot,
                         const EmpiricalEmbedding& mu,
                         const EmpiricalEmbedding& nu, CostKind cost);

// ---------------------------------------------------------------------------
// Damping term gamma * int exp((lambda_mu - lambda_nu - C) / gamma) d xi.

struct DampingSpec {
  enum class Kind { ProductMeasure, UniformDiscrete };
  Kind kind = Kind::ProductMeasure;
  // ProductMeasure: paired draws (x_i, y_i) ~ mu x nu.
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::VectorXd> ys;
  // UniformDiscrete: enumeration of the finite embedding space E.
  std::vector<Eigen::VectorXd> space;
};

// Product measure for continuous spaces, uniform over E x E for finite ones.
DampingSpec::Kind select_damping(bool discrete_space);

double damping_penalty(const DualPotentials& pot, const DampingSpec& spec,
                       CostKind cost);

// ---------------------------------------------------------------------------
// Oracles.

// Minimum-cost perfect matching (Hungarian algorithm, O(n^3)). Returns the
// column assigned to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// (1/n) min_sigma sum_i C(a_i, b_sigma(i)).
double exact_emd_assignment(std::span<const Eigen::VectorXd> a,
                            std::span<const Eigen::VectorXd> b, CostKind cost);

inline constexpr std::size_t kMaxExactSupport = 512;

struct TransportPlan {
  double value = 0.0;
  Eigen::MatrixXd plan;
};

// Exact discrete OT by successive shortest augmenting paths.
TransportPlan min_cost_transport(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b,
                                 const Eigen::MatrixXd& cost);
TransportPlan exact_ot_discrete(const EmpiricalEmbedding& a,
                                const EmpiricalEmbedding& b, CostKind cost);

struct SinkhornResult {
  // <pi, C> + gamma KL(pi | a x b)
  double value = 0.0;
  double transport_cost = 0.0;
  double kl = 0.0;
  double marginal_error = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd plan;
};

// Log-domain Sinkhorn with reference measure a x b. gamma is annealed from
// the cost scale down to the target; `max_iterations` bounds the total
// number of scaling sweeps.
SinkhornResult sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        const Eigen::MatrixXd& cost, double gamma,
                        int max_iterations, double tolerance = 1e-9);
SinkhornResult sinkhorn_oracle(const EmpiricalEmbedding& a,
                               const EmpiricalEmbedding& b, CostKind cost,
                               double gamma, int max_iterations);

}  // namespace bgrl
