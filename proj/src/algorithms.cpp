#include "bgrl/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

#include "bgrl/error.hpp"

namespace bgrl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> returns_of(const std::vector<Trajectory>& batch) {
  std::vector<double> r;
  r.reserve(batch.size());
  for (const auto& tau : batch) r.push_back(tau.total_reward());
  return r;
}

std::vector<Eigen::VectorXd> embed_all(const Bem& bem, const std::vector<Trajectory>& batch) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(batch.size());
  for (const auto& tau : batch) out.push_back(embed_trajectory(bem, tau));
  return out;
}

// M sampled-action rollouts of one policy with seeds derive_seed(seed, tag, i).
std::vector<Trajectory> collect(const PolicyParams& params, const EnvSpec& spec, int m,
                                std::uint64_t seed, std::string_view tag) {
  std::vector<Trajectory> batch(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    auto env = make_env(spec);
    batch[i] = rollout(*env, params, derive_seed(seed, tag, i), ActionMode::Sample);
  });
  return batch;
}

DualPotentials& ensure_potentials(std::optional<DualPotentials>& pot, int dim_mu, int dim_nu,
                                  const RegularizedObjectiveCfg& cfg, std::uint64_t seed) {
  if (!pot) {
    pot.emplace(make_potentials(dim_mu, dim_nu, cfg.num_features, cfg.rff_bandwidth,
                                cfg.gamma, cfg.alpha_dual, derive_seed(seed, "potentials")));
  }
  return *pot;
}

Eigen::VectorXd lambda_values(const DualPotentials& pot, Side side,
                              const std::vector<Eigen::VectorXd>& pts) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) v[i] = test_fn_eval(pot, side, pts[i]);
  return v;
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("BGRL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  std::vector<std::exception_ptr> errors(n);
  auto run_range = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void RegularizedObjectiveCfg::validate() const {
  require(gamma > 0.0 && std::isfinite(gamma), "smoothed solver requires gamma > 0");
  require(std::isfinite(beta), "beta must be finite");
  require(alpha_dual > 0.0, "alpha_dual must be > 0");
  require(dual_steps >= 1, "dual_steps must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(num_features >= 1, "num_features must be >= 1");
  require(rff_bandwidth > 0.0, "rff_bandwidth must be > 0");
}

void EsCfg::validate() const {
  require(n >= 2, "ES requires n >= 2 perturbations");
  require(!antithetic || n % 2 == 0, "antithetic ES requires an even n");
  require(sigma > 0.0 && eta > 0.0, "ES requires sigma > 0 and eta > 0");
  require(episodes >= 1, "ES requires episodes >= 1");
}

void PgCfg::validate() const {
  require(trajectories >= 2, "policy gradient requires M >= 2 trajectories");
  require(inner_steps >= 1, "policy gradient requires L >= 1 inner steps");
  require(eta > 0.0, "policy gradient requires eta > 0");
  require(ratio_clip > 1.0, "ratio_clip must be > 1");
  require(probe_capacity >= 1 && probe_samples >= 1, "probe sizes must be >= 1");
}

// ---------------------------------------------------------------------------
// ES

EsRollouts es_rollouts(const PolicyParams& params, const EnvSpec& spec, const Bem& bem,
                       const EsCfg& es, std::uint64_t seed) {
  es.validate();
  const Eigen::Index d = params.theta.size();
  EsRollouts out;
  out.eps.resize(es.n);
  for (int k = 0; k < es.n; ++k) {
    if (es.antithetic) {
      if (k % 2 == 1) {
        out.eps[k] = -out.eps[k - 1];
        continue;
      }
      Rng rng(derive_seed(seed, "es-eps", static_cast<std::uint64_t>(k / 2)));
      out.eps[k] = rng.normal_vector(d);
    } else {
      Rng rng(derive_seed(seed, "es-eps", static_cast<std::uint64_t>(k)));
      out.eps[k] = rng.normal_vector(d);
    }
  }
  const std::size_t policies = static_cast<std::size_t>(es.n) + 1;
  const std::size_t episodes = static_cast<std::size_t>(es.episodes);
  std::vector<Trajectory> trajs(policies * episodes);
  parallel_for(trajs.size(), [&](std::size_t idx) {
    const std::size_t k = idx / episodes;
    try {
      auto env = make_env(spec);
      const PolicyParams p =
          k < static_cast<std::size_t>(es.n) ? perturb(params, es.sigma, out.eps[k]) : params;
      trajs[idx] = rollout(*env, p, derive_seed(seed, "rollout", idx), es.mode);
    } catch (const std::exception& e) {
      if (k < static_cast<std::size_t>(es.n)) {
        throw Error("perturbation " + std::to_string(k) + ": " + e.what());
      }
      throw;
    }
  });
  out.returns.resize(es.n);
  out.embeddings.resize(es.n);
  for (std::size_t k = 0; k < policies; ++k) {
    double total = 0.0;
    std::vector<Eigen::VectorXd> emb;
    for (std::size_t j = 0; j < episodes; ++j) {
      const auto& tau = trajs[k * episodes + j];
      total += tau.total_reward();
      emb.push_back(embed_trajectory(bem, tau));
    }
    const double mean = total / static_cast<double>(episodes);
    if (k < static_cast<std::size_t>(es.n)) {
      out.returns[k] = mean;
      out.embeddings[k] = std::move(emb);
    } else {
      out.base_return = mean;
      out.base_embeddings = std::move(emb);
    }
  }
  return out;
}

void es_update(PolicyParams& params, const std::vector<Eigen::VectorXd>& eps,
               const std::vector<double>& scores, double sigma, double eta) {
  require_dim(eps.size() == scores.size(), "es_update: eps and scores differ in length");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.theta.size());
  for (std::size_t k = 0; k < eps.size(); ++k) g += scores[k] * eps[k];
  params.theta += eta * (g / sigma);
}

double paired_dual_score(const DualPotentials& pot, const std::vector<Eigen::VectorXd>& xs,
                         const std::vector<Eigen::VectorXd>& ys, CostKind cost) {
  require(!xs.empty() && !ys.empty(), "paired_dual_score: empty sample set");
  const Eigen::VectorXd lx = lambda_values(pot, Side::Mu, xs);
  const Eigen::VectorXd ly = lambda_values(pot, Side::Nu, ys);
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double f =
          smoothing_factor(lx[i], ly[j], transport_cost(cost, xs[i], ys[j]), pot.gamma).value;
      total += lx[i] - ly[j] - pot.gamma * f;
    }
  }
  return total / static_cast<double>(xs.size() * ys.size());
}

IterationRecord bges_step(BgesState& state, const EnvSpec& spec, const Bem& bem,
                          const RegularizedObjectiveCfg& cfg, const EsCfg& es,
                          std::uint64_t seed) {
  cfg.validate();
  const auto start = Clock::now();
  EsRollouts ro = es_rollouts(state.params, spec, bem, es, seed);

  std::vector<Eigen::VectorXd> current;
  for (const auto& e : ro.embeddings) current.insert(current.end(), e.begin(), e.end());
  EmpiricalEmbedding base;
  if (state.fixed_base) {
    base = *state.fixed_base;
  } else {
    std::vector<Eigen::VectorXd> pts;
    if (state.history.empty()) {
      pts = ro.base_embeddings;
    } else {
      for (const auto& h : state.history) pts.insert(pts.end(), h.begin(), h.end());
    }
    base = EmpiricalEmbedding(std::move(pts));
  }
  const EmpiricalEmbedding nu(current);
  require_dim(base.dim() == nu.dim(), "bges_step: base and current embeddings differ in dimension");

  DualPotentials& pot = ensure_potentials(state.pot, base.dim(), nu.dim(), cfg, seed);
  const std::int64_t sat0 = pot.saturations;
  pot = wd_solve(base, nu, cfg.cost, cfg.dual_steps, pot, derive_seed(seed, "dual"));

  // imitation compares each perturbation against the expert; otherwise
  // against the unperturbed rollout
  const std::vector<Eigen::VectorXd>& anchor =
      state.fixed_base ? base.points() : ro.base_embeddings;
  std::vector<double> scores(es.n);
  for (int k = 0; k < es.n; ++k) {
    const double wd_k = paired_dual_score(pot, anchor, ro.embeddings[k], cfg.cost);
    scores[k] = (1.0 - cfg.beta) * (ro.returns[k] - ro.base_return) + cfg.beta * wd_k;
  }
  es_update(state.params, ro.eps, scores, es.sigma, es.eta);

  IterationRecord rec;
  rec.iter = state.iter;
  rec.seed = seed;
  rec.mean_reward = ro.base_return;
  rec.reward_std = std_of(ro.returns);
  rec.dual_objective = dual_objective_exact(pot, base, nu, cfg.cost);
  rec.wd_estimate = rec.dual_objective + pot.gamma;
  rec.saturations = pot.saturations - sat0;

  if (!state.fixed_base) {
    state.history.push_back(std::move(current));
    while (static_cast<int>(state.history.size()) > cfg.window) state.history.pop_front();
  }
  ++state.iter;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

std::vector<IterationRecord> imitation_run(PolicyParams params, const EnvSpec& spec,
                                           const Bem& bem, const EmpiricalEmbedding& expert,
                                           const RegularizedObjectiveCfg& cfg,
                                           const EsCfg& es, int iterations, std::uint64_t seed,
                                           PolicyParams* final_params) {
  require(!expert.empty(), "imitation_run: empty expert embedding");
  require(iterations >= 1, "imitation_run: iterations must be >= 1");
  BgesState state{std::move(params), std::nullopt, {}, expert, 0};
  std::vector<IterationRecord> records;
  records.reserve(iterations);
  for (int t = 0; t < iterations; ++t) {
    records.push_back(bges_step(state, spec, bem, cfg, es, derive_seed(seed, "iter", t)));
  }
  if (final_params) *final_params = state.params;
  return records;
}

// ---------------------------------------------------------------------------
// Policy gradients

std::vector<std::vector<double>> batch_advantages(const std::vector<Trajectory>& batch) {
  require(!batch.empty(), "batch_advantages: empty batch");
  std::size_t len = 0;
  for (const auto& tau : batch) len = std::max(len, tau.rewards.size());
  std::vector<std::vector<double>> rtg(batch.size());
  std::vector<double> sum(len, 0.0);
  std::vector<double> count(len, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& r = batch[i].rewards;
    rtg[i].assign(r.size(), 0.0);
    double acc = 0.0;
    for (std::size_t t = r.size(); t-- > 0;) {
      acc += r[t];
      rtg[i][t] = acc;
      sum[t] += acc;
      count[t] += 1.0;
    }
  }
  for (auto& row : rtg) {
    for (std::size_t t = 0; t < row.size(); ++t) row[t] -= sum[t] / count[t];
  }
  return rtg;
}

Eigen::VectorXd trajectory_score(const PolicyParams& params, const Trajectory& tau) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.theta.size());
  for (std::size_t t = 0; t < tau.states.size(); ++t) {
    g += log_prob_grad(params, tau.states[t], tau.actions[t]).grad;
  }
  return g;
}

SurrogateGrad surrogate_gradient(const PolicyParams& params,
                                 const std::vector<Trajectory>& batch,
                                 const std::vector<std::vector<double>>& advantages,
                                 const std::vector<std::vector<double>>& prev_log_probs,
                                 double clip) {
  SurrogateGrad out;
  out.grad = Eigen::VectorXd::Zero(params.theta.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tau = batch[i];
    for (std::size_t t = 0; t < tau.states.size(); ++t) {
      const LogProbGrad lp = log_prob_grad(params, tau.states[t], tau.actions[t]);
      double ratio = std::exp(std::min(lp.log_prob - prev_log_probs[i][t], 700.0));
      if (ratio > clip) {
        ratio = clip;
        ++out.clips;
      }
      out.value += advantages[i][t] * ratio;
      out.grad += (advantages[i][t] * ratio) * lp.grad;
    }
  }
  const double m = static_cast<double>(batch.size());
  out.value /= m;
  out.grad /= m;
  return out;
}

Eigen::VectorXd wd_score_gradient(const PolicyParams& params, const DualPotentials& pot,
                                   const std::vector<Eigen::VectorXd>& xs,
                                   const std::vector<Trajectory>& batch2,
                                   const std::vector<Eigen::VectorXd>& ys, CostKind cost) {
  require_dim(batch2.size() == ys.size(), "wd_score_gradient: batch and embeddings differ");
  const Eigen::VectorXd lx = lambda_values(pot, Side::Mu, xs);
  const Eigen::VectorXd ly = lambda_values(pot, Side::Nu, ys);
  std::vector<double> h(ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j) {
    double pen = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      pen += smoothing_factor(lx[i], ly[j], transport_cost(cost, xs[i], ys[j]), pot.gamma).value;
    }
    h[j] = -ly[j] - pot.gamma * pen / static_cast<double>(xs.size());
  }
  const double hbar = mean_of(h);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.theta.size());
  for (std::size_t j = 0; j < ys.size(); ++j) {
    g += (h[j] - hbar) * trajectory_score(params, batch2[j]);
  }
  return g / static_cast<double>(ys.size());
}

IterationRecord bgpg_step_onpolicy(BgpgState& state, const EnvSpec& spec, const Bem& bem,
                                   const RegularizedObjectiveCfg& cfg, const PgCfg& pg,
                                   std::uint64_t seed) {
  cfg.validate();
  pg.validate();
  const auto start = Clock::now();
  const PolicyParams prev = state.params;
  const std::vector<Trajectory> batch1 = collect(prev, spec, pg.trajectories, seed, "pg-prev");
  const auto adv = batch_advantages(batch1);
  std::vector<std::vector<double>> prev_lp(batch1.size());
  for (std::size_t i = 0; i < batch1.size(); ++i) {
    for (std::size_t t = 0; t < batch1[i].states.size(); ++t) {
      prev_lp[i].push_back(log_prob(prev, batch1[i].states[t], batch1[i].actions[t]));
    }
  }
  const auto xs = embed_all(bem, batch1);
  DualPotentials& pot =
      ensure_potentials(state.pot, static_cast<int>(xs.front().size()),
                        static_cast<int>(xs.front().size()), cfg, seed);
  const std::int64_t sat0 = pot.saturations;
  std::int64_t clips = 0;
  std::vector<Eigen::VectorXd> ys;
  for (int l = 0; l < pg.inner_steps; ++l) {
    const std::uint64_t round_seed = derive_seed(seed, "pg-round", l);
    const auto batch2 = collect(state.params, spec, pg.trajectories, round_seed, "pg-cur");
    ys = embed_all(bem, batch2);
    const SurrogateGrad sur = surrogate_gradient(state.params, batch1, adv, prev_lp, pg.ratio_clip);
    clips += sur.clips;
    Eigen::VectorXd g = sur.grad;
    if (cfg.beta != 0.0) {
      g += cfg.beta * wd_score_gradient(state.params, pot, xs, batch2, ys, cfg.cost);
    }
    state.params.theta += pg.eta * g;
    pot = wd_solve(EmpiricalEmbedding(xs), EmpiricalEmbedding(ys), cfg.cost, cfg.dual_steps,
                   pot, derive_seed(round_seed, "dual"));
  }

  IterationRecord rec;
  rec.iter = state.iter++;
  rec.seed = seed;
  const auto returns = returns_of(batch1);
  rec.mean_reward = mean_of(returns);
  rec.reward_std = std_of(returns);
  rec.dual_objective = dual_objective_exact(pot, EmpiricalEmbedding(xs), EmpiricalEmbedding(ys), cfg.cost);
  rec.wd_estimate = rec.dual_objective + pot.gamma;
  rec.saturations = pot.saturations - sat0;
  rec.ratio_clips = clips;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

PathwiseGrad probe_pathwise_gradient(const PolicyParams& params, const DualPotentials& pot,
                                     const std::vector<Eigen::VectorXd>& states,
                                     const std::vector<Eigen::VectorXd>& partners,
                                     CostKind cost) {
  require_dim(states.size() == partners.size() && !states.empty(),
              "probe_pathwise_gradient: states and partners must pair up");
  const Eigen::Index k = params.arch.output_dim;
  const Eigen::VectorXd zero_eps = Eigen::VectorXd::Zero(k);
  PathwiseGrad out;
  out.grad = Eigen::VectorXd::Zero(params.theta.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Eigen::VectorXd z = probe_point(params, states[i]);
    const double lz = test_fn_eval(pot, Side::Mu, z);
    const double lw = test_fn_eval(pot, Side::Nu, partners[i]);
    const double f =
        smoothing_factor(lz, lw, transport_cost(cost, z, partners[i]), pot.gamma).value;
    out.value += lz - pot.gamma * f;
    // d/dz [lambda(z) - gamma F] = (1 - F) grad lambda(z) + F grad_z C
    const Eigen::VectorXd dz = (1.0 - f) * pot.map_mu->gradient_of(pot.p_mu, z) +
                               f * transport_cost_grad_x(cost, z, partners[i]);
    out.grad += reparam_action_grad(params, states[i], zero_eps, dz.tail(k)).vjp;
  }
  const double n = static_cast<double>(states.size());
  out.value /= n;
  out.grad /= n;
  return out;
}

IterationRecord bgpg_step_offpolicy(BgpgState& state, const EnvSpec& spec,
                                    const RegularizedObjectiveCfg& cfg, const PgCfg& pg,
                                    std::uint64_t seed) {
  cfg.validate();
  pg.validate();
  const auto start = Clock::now();
  const PolicyParams prev = state.params;
  const std::vector<Trajectory> batch1 = collect(prev, spec, pg.trajectories, seed, "pg-prev");
  if (!state.probe) state.probe.emplace(pg.probe_capacity);
  for (const auto& tau : batch1) state.probe->insert_trajectory(tau);
  const auto adv = batch_advantages(batch1);
  std::vector<std::vector<double>> prev_lp(batch1.size());
  for (std::size_t i = 0; i < batch1.size(); ++i) {
    for (std::size_t t = 0; t < batch1[i].states.size(); ++t) {
      prev_lp[i].push_back(log_prob(prev, batch1[i].states[t], batch1[i].actions[t]));
    }
  }
  const int dim = prev.arch.input_dim + prev.arch.output_dim;
  DualPotentials& pot = ensure_potentials(state.pot, dim, dim, cfg, seed);
  const std::int64_t sat0 = pot.saturations;
  std::int64_t clips = 0;
  const auto prev_emb = probe_embedding(*state.probe, prev, pg.probe_samples,
                                        derive_seed(seed, "probe-prev"));
  EmpiricalEmbedding cur_emb;
  for (int l = 0; l < pg.inner_steps; ++l) {
    const std::uint64_t round_seed = derive_seed(seed, "pg-round", l);
    const SurrogateGrad sur = surrogate_gradient(state.params, batch1, adv, prev_lp, pg.ratio_clip);
    clips += sur.clips;
    Eigen::VectorXd g = sur.grad;
    if (cfg.beta != 0.0) {
      Rng rng(derive_seed(round_seed, "probe-states"));
      const auto states = state.probe->sample(pg.probe_samples, rng);
      std::vector<Eigen::VectorXd> partners;
      partners.reserve(states.size());
      for (std::size_t i = 0; i < states.size(); ++i) partners.push_back(prev_emb.sample(rng));
      g += cfg.beta * probe_pathwise_gradient(state.params, pot, states, partners, cfg.cost).grad;
    }
    state.params.theta += pg.eta * g;
    cur_emb = probe_embedding(*state.probe, state.params, pg.probe_samples,
                              derive_seed(round_seed, "probe-cur"));
    pot = wd_solve(cur_emb, prev_emb, cfg.cost, cfg.dual_steps, pot,
                   derive_seed(round_seed, "dual"));
  }

  IterationRecord rec;
  rec.iter = state.iter++;
  rec.seed = seed;
  const auto returns = returns_of(batch1);
  rec.mean_reward = mean_of(returns);
  rec.reward_std = std_of(returns);
  rec.dual_objective = dual_objective_exact(pot, cur_emb, prev_emb, cfg.cost);
  rec.wd_estimate = rec.dual_objective + pot.gamma;
  rec.saturations = pot.saturations - sat0;
  rec.ratio_clips = clips;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

// ---------------------------------------------------------------------------
// Repulsion

RepulsionRecord repulsion_step(RepulsionState& state, const EnvSpec& spec, const Bem& bem,
                               const RegularizedObjectiveCfg& cfg, int trajectories,
                               double eta, std::uint64_t seed) {
  cfg.validate();
  require(trajectories >= 2, "repulsion_step: M must be >= 2");
  require(eta > 0.0, "repulsion_step: eta must be > 0");
  const auto start = Clock::now();
  const auto batch_a = collect(state.a, spec, trajectories, seed, "rep-a");
  const auto batch_b = collect(state.b, spec, trajectories, seed, "rep-b");
  const auto xs = embed_all(bem, batch_a);
  const auto ys = embed_all(bem, batch_b);
  DualPotentials& pot = ensure_potentials(state.pot, static_cast<int>(xs.front().size()),
                                          static_cast<int>(ys.front().size()), cfg, seed);
  const std::int64_t sat0 = pot.saturations;

  const std::size_t m = xs.size();
  std::vector<double> ra(m);
  std::vector<double> rb(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lx = test_fn_eval(pot, Side::Mu, xs[i]);
    const double ly = test_fn_eval(pot, Side::Nu, ys[i]);
    const double f =
        smoothing_factor(lx, ly, transport_cost(cfg.cost, xs[i], ys[i]), pot.gamma).value;
    ra[i] = batch_a[i].total_reward() + cfg.beta * (lx - pot.gamma * f);
    rb[i] = batch_b[i].total_reward() + cfg.beta * (-ly - pot.gamma * f);
  }
  auto reinforce = [&](PolicyParams& p, const std::vector<Trajectory>& batch,
                       const std::vector<double>& r) {
    const double baseline = mean_of(r);
    const double spread = std_of(r);
    const double scale = spread > 1e-12 ? 1.0 / spread : 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.theta.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      g += (scale * (r[i] - baseline)) * trajectory_score(p, batch[i]);
    }
    g /= static_cast<double>(batch.size());
    // the score grows like 1/std^2 as the policy sharpens; cap the step
    const double norm = g.norm();
    if (norm > 1.0) g /= norm;
    p.theta += eta * g;
  };
  reinforce(state.a, batch_a, ra);
  reinforce(state.b, batch_b, rb);
  pot = wd_solve(EmpiricalEmbedding(xs), EmpiricalEmbedding(ys), cfg.cost, cfg.dual_steps, pot,
                 derive_seed(seed, "dual"));

  RepulsionRecord rec;
  const double dual = dual_objective_exact(pot, EmpiricalEmbedding(xs), EmpiricalEmbedding(ys), cfg.cost);
  const auto fill = [&](IterationRecord& r, const std::vector<Trajectory>& batch) {
    const auto returns = returns_of(batch);
    r.iter = state.iter;
    r.seed = seed;
    r.mean_reward = mean_of(returns);
    r.reward_std = std_of(returns);
    r.dual_objective = dual;
    r.wd_estimate = dual + pot.gamma;
    r.saturations = pot.saturations - sat0;
  };
  fill(rec.a, batch_a);
  fill(rec.b, batch_b);
  for (std::size_t i = 0; i < m; ++i) {
    rec.embed_a += xs[i][0] / static_cast<double>(m);
    rec.embed_b += ys[i][0] / static_cast<double>(m);
  }
  ++state.iter;
  rec.a.wall_ms = rec.b.wall_ms = elapsed_ms(start);
  return rec;
}

}  // namespace bgrl
