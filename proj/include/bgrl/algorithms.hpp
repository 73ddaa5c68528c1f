#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "bgrl/embed.hpp"
#include "bgrl/envsim.hpp"
#include "bgrl/policy.hpp"
#include "bgrl/transport.hpp"

namespace bgrl {

// Worker count for rollouts: BGRL_THREADS if set to a positive integer,
// otherwise the hardware concurrency.
int thread_count();

// Runs fn(0..n-1) on up to thread_count() threads. Results must be written
// by index; the first exception (lowest index) is rethrown after joining.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Settings of the WD-regularized objective R(theta) + beta WD_gamma.
struct RegularizedObjectiveCfg {
  double beta = 0.0;
  double gamma = 0.1;
  double alpha_dual = 0.03;
  int dual_steps = 100;
  // number of previous iterations whose embeddings form the base distribution
  int window = 2;
  int num_features = 100;
  double rff_bandwidth = 1.0;
  CostKind cost = CostKind::L2;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double wd_estimate = 0.0;
  double dual_objective = 0.0;
  std::int64_t saturations = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  // clipped importance ratios (policy-gradient methods)
  std::int64_t ratio_clips = 0;
};

// ---------------------------------------------------------------------------
// Evolution strategies.

struct EsCfg {
  int n = 8;              // perturbations per iteration
  double sigma = 0.1;
  double eta = 0.01;
  int episodes = 1;       // rollouts per policy
  bool antithetic = false;
  ActionMode mode = ActionMode::Mean;

  void validate() const;
};

// Rollouts of the perturbed policies theta + sigma eps_k (k < n) and of the
// unperturbed policy. Seeds:
//   eps_k         Rng(derive_seed(seed, "es-eps", k)).normal_vector(|theta|)
//                 (antithetic: eps_{2j+1} = -eps_{2j}, drawn with index j)
//   episode j of policy k (k = n is unperturbed)
//                 derive_seed(seed, "rollout", k * episodes + j)
struct EsRollouts {
  std::vector<Eigen::VectorXd> eps;
  std::vector<double> returns;                               // R_k
  std::vector<std::vector<Eigen::VectorXd>> embeddings;      // per k
  double base_return = 0.0;                                  // R_t
  std::vector<Eigen::VectorXd> base_embeddings;
};

EsRollouts es_rollouts(const PolicyParams& params, const EnvSpec& env, const Bem& bem,
                       const EsCfg& es, std::uint64_t seed);

// theta + eta (1/sigma) sum_k score_k eps_k
void es_update(PolicyParams& params, const std::vector<Eigen::VectorXd>& eps,
               const std::vector<double>& scores, double sigma, double eta);

struct BgesState {
  PolicyParams params;
  std::optional<DualPotentials> pot;
  // embeddings of the previous `window` iterations' perturbed policies
  std::deque<std::vector<Eigen::VectorXd>> history;
  // imitation: base distribution pinned to an expert embedding
  std::optional<EmpiricalEmbedding> fixed_base;
  int iter = 0;
};

// One iteration. The potentials are created on first use with seed
// derive_seed(seed0, "potentials") where seed0 is the first step's seed, and
// trained for cfg.dual_steps steps (seed derive_seed(seed, "dual")) with
// mu = base distribution and nu = the current perturbed embeddings. Each
// perturbation is scored by the sampled dual objective over pairs of the
// unperturbed policy's embeddings (mu side) and its own (nu side); with a
// fixed base (imitation) the mu side is the base itself:
//   theta += eta (1/sigma) sum_k [(1 - beta)(R_k - R_t) + beta WD_k] eps_k.
IterationRecord bges_step(BgesState& state, const EnvSpec& env, const Bem& bem,
                          const RegularizedObjectiveCfg& cfg, const EsCfg& es,
                          std::uint64_t seed);

// Mean over all (x, y) pairs of lambda_mu(x) - lambda_nu(y) - gamma F(x, y).
double paired_dual_score(const DualPotentials& pot, const std::vector<Eigen::VectorXd>& xs,
                         const std::vector<Eigen::VectorXd>& ys, CostKind cost);

// BGES with the base distribution fixed to an expert embedding (beta < 0
// attracts). Records one entry per iteration.
std::vector<IterationRecord> imitation_run(PolicyParams params, const EnvSpec& env,
                                           const Bem& bem,
                                           const EmpiricalEmbedding& expert,
                                           const RegularizedObjectiveCfg& cfg,
                                           const EsCfg& es, int iterations,
                                           std::uint64_t seed,
                                           PolicyParams* final_params = nullptr);

// ---------------------------------------------------------------------------
// Policy gradients.

struct PgCfg {
  int trajectories = 16;    // M
  int inner_steps = 5;      // L
  double eta = 0.01;
  double ratio_clip = 1e3;
  // probe buffer for off-policy embeddings
  std::size_t probe_capacity = 2000;
  std::size_t probe_samples = 64;

  void validate() const;
};

struct BgpgState {
  PolicyParams params;
  std::optional<DualPotentials> pot;
  std::optional<ProbeBuffer> probe;
  int iter = 0;
};

// Reward-to-go minus the per-timestep mean over the batch.
std::vector<std::vector<double>> batch_advantages(const std::vector<Trajectory>& batch);

// Sum over (i, t) of A_it * ratio_it * grad log pi_theta(a_it | s_it) / M,
// ratio = pi_theta / pi_prev clipped at `clip`. Returns the gradient and
// the surrogate value; clip events are added to *clips.
struct SurrogateGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
  std::int64_t clips = 0;
};
SurrogateGrad surrogate_gradient(const PolicyParams& params,
                                 const std::vector<Trajectory>& batch,
                                 const std::vector<std::vector<double>>& advantages,
                                 const std::vector<std::vector<double>>& prev_log_probs,
                                 double clip);

// Score-function gradient of E_{tau2 ~ pi_theta} E_{tau1}[-lambda_nu(Phi tau2)
// - gamma F(Phi tau1, Phi tau2)] using a mean baseline over tau2.
Eigen::VectorXd wd_score_gradient(const PolicyParams& params, const DualPotentials& pot,
                                   const std::vector<Eigen::VectorXd>& xs,
                                   const std::vector<Trajectory>& batch2,
                                   const std::vector<Eigen::VectorXd>& ys, CostKind cost);

// Sum over t of grad log pi_theta(a_t | s_t).
Eigen::VectorXd trajectory_score(const PolicyParams& params, const Trajectory& tau);

IterationRecord bgpg_step_onpolicy(BgpgState& state, const EnvSpec& env, const Bem& bem,
                                   const RegularizedObjectiveCfg& cfg, const PgCfg& pg,
                                   std::uint64_t seed);

// Pathwise value and gradient of mean_i [lambda_mu(z_i) - gamma F(z_i, w_i)]
// with z_i = [s_i ; mean_theta(s_i)] and fixed partner points w_i.
struct PathwiseGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};
PathwiseGrad probe_pathwise_gradient(const PolicyParams& params, const DualPotentials& pot,
                                     const std::vector<Eigen::VectorXd>& states,
                                     const std::vector<Eigen::VectorXd>& partners,
                                     CostKind cost);

IterationRecord bgpg_step_offpolicy(BgpgState& state, const EnvSpec& env,
                                    const RegularizedObjectiveCfg& cfg, const PgCfg& pg,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Repulsion / attraction between two policies.

struct RepulsionState {
  PolicyParams a;
  PolicyParams b;
  std::optional<DualPotentials> pot;
  int iter = 0;
};

struct RepulsionRecord {
  IterationRecord a;
  IterationRecord b;
  // mean embedding of each policy's batch
  double embed_a = 0.0;
  double embed_b = 0.0;
};

// Collects M paired trajectories (tau1 ~ a, tau2 ~ b), forms
//   R_a = R(tau1) + beta (lambda_mu(Phi tau1) - gamma F)
//   R_b = R(tau2) + beta (-lambda_nu(Phi tau2) - gamma F)
// and applies a REINFORCE step with the batch-standardized surrogate
// rewards (R - mean) / std to each policy (update norm capped at eta), then
// trains the potentials on the two batches.
RepulsionRecord repulsion_step(RepulsionState& state, const EnvSpec& env, const Bem& bem,
                               const RegularizedObjectiveCfg& cfg, int trajectories,
                               double eta, std::uint64_t seed);

}  // namespace bgrl
