#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "bgrl/algorithms.hpp"

namespace bgrl {

enum class DivergenceKind { None, KL, JS, Hellinger, TV, EuclideanBC };

std::string_view to_string(DivergenceKind kind);
DivergenceKind parse_divergence_kind(std::string_view name);

struct HistogramDivergenceCfg {
  DivergenceKind kind = DivergenceKind::TV;
  int bins = 16;               // per dimension
  Eigen::VectorXd lo;          // per-dimension range
  Eigen::VectorXd hi;
  double epsilon = 1e-6;       // added to every bin before normalizing

  void validate(int dim) const;
};

// Joint histogram over all dimensions (bins^dim cells), epsilon-smoothed and
// normalized. Out-of-range samples fall into the edge bins.
Eigen::VectorXd histogram(const HistogramDivergenceCfg& cfg,
                          const std::vector<Eigen::VectorXd>& samples);

// KL(p||q), JS, squared Hellinger (1/2 sum (sqrt p - sqrt q)^2) or TV.
double divergence(DivergenceKind kind, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

double histogram_divergence(const HistogramDivergenceCfg& cfg,
                            const std::vector<Eigen::VectorXd>& a,
                            const std::vector<Eigen::VectorXd>& b);

struct DivergenceEsState {
  PolicyParams params;
  // histogram range, fixed from the first iteration's embeddings
  std::optional<Eigen::VectorXd> lo;
  std::optional<Eigen::VectorXd> hi;
  int iter = 0;
};

// ES whose per-perturbation novelty is a divergence between the
// perturbation's embedding samples and the unperturbed policy's:
//   theta += eta (1/sigma) sum_k [(1 - beta)(R_k - R_t) + beta D_k] eps_k.
// None gives vanilla ES; EuclideanBC uses |mean_k - mean_t|_2.
IterationRecord es_step_with_divergence(DivergenceEsState& state, const EnvSpec& env,
                                        const Bem& bem, DivergenceKind kind, int bins,
                                        double epsilon, const EsCfg& es, double beta,
                                        std::uint64_t seed);

}  // namespace bgrl
