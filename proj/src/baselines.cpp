#include "bgrl/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "bgrl/error.hpp"

namespace bgrl {

std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::None: return "none";
    case DivergenceKind::KL: return "kl";
    case DivergenceKind::JS: return "js";
    case DivergenceKind::Hellinger: return "hellinger";
    case DivergenceKind::TV: return "tv";
    case DivergenceKind::EuclideanBC: return "euclidean";
  }
  return "?";
}

DivergenceKind parse_divergence_kind(std::string_view name) {
  for (DivergenceKind k : {DivergenceKind::None, DivergenceKind::KL, DivergenceKind::JS,
                           DivergenceKind::Hellinger, DivergenceKind::TV,
                           DivergenceKind::EuclideanBC}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown divergence '" + std::string(name) + "'");
}

void HistogramDivergenceCfg::validate(int dim) const {
  require(bins >= 2, "histogram: bins must be >= 2");
  require(epsilon > 0.0, "histogram: epsilon must be > 0");
  require_dim(lo.size() == dim && hi.size() == dim, "histogram: range dimension mismatch");
  require((hi.array() > lo.array()).all(), "histogram: empty range");
  require(std::pow(static_cast<double>(bins), dim) <= 1e7, "histogram: too many cells");
}

Eigen::VectorXd histogram(const HistogramDivergenceCfg& cfg,
                          const std::vector<Eigen::VectorXd>& samples) {
  require(!samples.empty(), "histogram: no samples");
  const int dim = static_cast<int>(samples.front().size());
  cfg.validate(dim);
  Eigen::Index cells = 1;
  for (int d = 0; d < dim; ++d) cells *= cfg.bins;
  Eigen::VectorXd h = Eigen::VectorXd::Constant(cells, cfg.epsilon);
  for (const auto& x : samples) {
    require_dim(x.size() == dim, "histogram: ragged samples");
    Eigen::Index cell = 0;
    for (int d = dim - 1; d >= 0; --d) {
      const double u = (x[d] - cfg.lo[d]) / (cfg.hi[d] - cfg.lo[d]);
      const int b = std::clamp(static_cast<int>(std::floor(u * cfg.bins)), 0, cfg.bins - 1);
      cell = cell * cfg.bins + b;
    }
    h[cell] += 1.0;
  }
  return h / h.sum();
}

double divergence(DivergenceKind kind, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  require_dim(p.size() == q.size(), "divergence: histogram sizes differ");
  const Eigen::ArrayXd a = p.array();
  const Eigen::ArrayXd b = q.array();
  auto kl = [](const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) s += x[i] * std::log(x[i] / y[i]);
    }
    return std::max(s, 0.0);
  };
  switch (kind) {
    case DivergenceKind::KL: return kl(a, b);
    case DivergenceKind::JS: {
      const Eigen::ArrayXd m = 0.5 * (a + b);
      return std::min(0.5 * kl(a, m) + 0.5 * kl(b, m), std::numbers::ln2);
    }
    case DivergenceKind::Hellinger: return 0.5 * (a.sqrt() - b.sqrt()).square().sum();
    case DivergenceKind::TV: return 0.5 * (a - b).abs().sum();
    case DivergenceKind::None:
    case DivergenceKind::EuclideanBC: break;
  }
  throw Error("divergence: not a histogram divergence");
}

double histogram_divergence(const HistogramDivergenceCfg& cfg,
                            const std::vector<Eigen::VectorXd>& a,
                            const std::vector<Eigen::VectorXd>& b) {
  return divergence(cfg.kind, histogram(cfg, a), histogram(cfg, b));
}

IterationRecord es_step_with_divergence(DivergenceEsState& state, const EnvSpec& env,
                                        const Bem& bem, DivergenceKind kind, int bins,
                                        double epsilon, const EsCfg& es, double beta,
                                        std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  EsRollouts ro = es_rollouts(state.params, env, bem, es, seed);
  const int dim = static_cast<int>(ro.base_embeddings.front().size());

  std::vector<double> novelty(es.n, 0.0);
  if (kind == DivergenceKind::EuclideanBC) {
    auto mean = [](const std::vector<Eigen::VectorXd>& v) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(v.front().size());
      for (const auto& x : v) m += x;
      return Eigen::VectorXd(m / static_cast<double>(v.size()));
    };
    const Eigen::VectorXd mt = mean(ro.base_embeddings);
    for (int k = 0; k < es.n; ++k) novelty[k] = (mean(ro.embeddings[k]) - mt).norm();
  } else if (kind != DivergenceKind::None) {
    if (!state.lo) {
      // range from this first iteration's embeddings, padded by one bin
      Eigen::VectorXd lo = ro.base_embeddings.front();
      Eigen::VectorXd hi = lo;
      for (const auto& e : ro.embeddings) {
        for (const auto& x : e) {
          lo = lo.cwiseMin(x);
          hi = hi.cwiseMax(x);
        }
      }
      const Eigen::VectorXd span = (hi - lo).cwiseMax(1e-3);
      state.lo = lo - span / bins;
      state.hi = hi + span / bins;
    }
    HistogramDivergenceCfg cfg{kind, bins, *state.lo, *state.hi, epsilon};
    cfg.validate(dim);
    const Eigen::VectorXd q = histogram(cfg, ro.base_embeddings);
    for (int k = 0; k < es.n; ++k) {
      novelty[k] = divergence(kind, histogram(cfg, ro.embeddings[k]), q);
    }
  }
  const double b = kind == DivergenceKind::None ? 0.0 : beta;
  std::vector<double> scores(es.n);
  for (int k = 0; k < es.n; ++k) {
    scores[k] = (1.0 - b) * (ro.returns[k] - ro.base_return) + b * novelty[k];
  }
  es_update(state.params, ro.eps, scores, es.sigma, es.eta);

  IterationRecord rec;
  rec.iter = state.iter++;
  rec.seed = seed;
  rec.mean_reward = ro.base_return;
  double m = 0.0;
  for (double r : ro.returns) m += r;
  m /= static_cast<double>(ro.returns.size());
  double v = 0.0;
  for (double r : ro.returns) v += (r - m) * (r - m);
  rec.reward_std = std::sqrt(v / static_cast<double>(ro.returns.size()));
  double nov = 0.0;
  for (double x : novelty) nov += x;
  // no dual problem here; report the mean novelty in both columns
  rec.wd_estimate = rec.dual_objective = nov / static_cast<double>(es.n);
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace bgrl
