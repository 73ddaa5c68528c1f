#include "bgrl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "bgrl/error.hpp"
#include "bgrl/rng.hpp"

namespace bgrl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw Error("expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& v) {
  Int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw Error("expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("expected true or false, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field num_field(T RunConfig::*member) {
  Field f;
  if constexpr (std::is_same_v<T, double>) {
    f.set = [member](RunConfig& c, const std::string& v) { c.*member = to_double(v); };
    f.get = [member](const RunConfig& c) { return fmt_double(c.*member); };
  } else {
    f.set = [member](RunConfig& c, const std::string& v) { c.*member = to_int<T>(v); };
    f.get = [member](const RunConfig& c) { return std::to_string(c.*member); };
  }
  return f;
}

// Serialization order is the map order (alphabetical).
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["algorithm"] = {[](RunConfig& c, const std::string& v) { c.algorithm = parse_algorithm(v); },
                      [](const RunConfig& c) { return std::string(to_string(c.algorithm)); }};
    t["env"] = {[](RunConfig& c, const std::string& v) { c.env = parse_env_kind(v); },
                [](const RunConfig& c) { return std::string(to_string(c.env)); }};
    t["bem"] = {[](RunConfig& c, const std::string& v) { c.bem = parse_bem_kind(v); },
                [](const RunConfig& c) { return std::string(to_string(c.bem)); }};
    t["cost"] = {[](RunConfig& c, const std::string& v) { c.cost = parse_cost_kind(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.cost)); }};
    t["divergence"] = {
        [](RunConfig& c, const std::string& v) { c.divergence = parse_divergence_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.divergence)); }};
    t["es_mode"] = {[](RunConfig& c, const std::string& v) {
                      if (v == "mean") c.es_mode = ActionMode::Mean;
                      else if (v == "sample") c.es_mode = ActionMode::Sample;
                      else throw Error("es_mode must be mean or sample");
                    },
                    [](const RunConfig& c) {
                      return std::string(c.es_mode == ActionMode::Mean ? "mean" : "sample");
                    }};
    t["antithetic"] = {[](RunConfig& c, const std::string& v) { c.antithetic = to_bool(v); },
                       [](const RunConfig& c) { return std::string(c.antithetic ? "true" : "false"); }};
    t["hidden"] = {[](RunConfig& c, const std::string& v) {
                     c.hidden.clear();
                     if (v == "none") return;
                     std::stringstream ss(v);
                     std::string item;
                     while (std::getline(ss, item, ',')) c.hidden.push_back(to_int<int>(trim(item)));
                   },
                   [](const RunConfig& c) {
                     if (c.hidden.empty()) return std::string("none");
                     std::string s;
                     for (std::size_t i = 0; i < c.hidden.size(); ++i) {
                       if (i) s += ",";
                       s += std::to_string(c.hidden[i]);
                     }
                     return s;
                   }};
    t["expert"] = {[](RunConfig& c, const std::string& v) { c.expert = v; },
                   [](const RunConfig& c) { return c.expert; }};
    t["output"] = {[](RunConfig& c, const std::string& v) { c.output = v; },
                   [](const RunConfig& c) { return c.output; }};
    t["horizon"] = num_field(&RunConfig::horizon);
    t["max_step"] = num_field(&RunConfig::max_step);
    t["layer_states"] = num_field(&RunConfig::layer_states);
    t["num_actions"] = num_field(&RunConfig::num_actions);
    t["mdp_seed"] = num_field(&RunConfig::mdp_seed);
    t["chain_length"] = num_field(&RunConfig::chain_length);
    t["chain_start"] = num_field(&RunConfig::chain_start);
    t["left_reward"] = num_field(&RunConfig::left_reward);
    t["right_reward"] = num_field(&RunConfig::right_reward);
    t["fixed_state"] = num_field(&RunConfig::fixed_state);
    t["gamma"] = num_field(&RunConfig::gamma);
    t["beta"] = num_field(&RunConfig::beta);
    t["eta"] = num_field(&RunConfig::eta);
    t["sigma"] = num_field(&RunConfig::sigma);
    t["n"] = num_field(&RunConfig::n);
    t["episodes"] = num_field(&RunConfig::episodes);
    t["M"] = num_field(&RunConfig::trajectories);
    t["L"] = num_field(&RunConfig::inner_steps);
    t["iterations"] = num_field(&RunConfig::iterations);
    t["m"] = num_field(&RunConfig::num_features);
    t["sigma_rff"] = num_field(&RunConfig::sigma_rff);
    t["alpha_dual"] = num_field(&RunConfig::alpha_dual);
    t["warm_start"] = num_field(&RunConfig::warm_start);
    t["window"] = num_field(&RunConfig::window);
    t["log_std"] = num_field(&RunConfig::log_std);
    t["init_scale"] = num_field(&RunConfig::init_scale);
    t["bins"] = num_field(&RunConfig::bins);
    t["hist_epsilon"] = num_field(&RunConfig::hist_epsilon);
    t["probe_capacity"] = num_field(&RunConfig::probe_capacity);
    t["probe_samples"] = num_field(&RunConfig::probe_samples);
    t["seed"] = num_field(&RunConfig::seed);
    return t;
  }();
  return table;
}

bool uses_dual_solver(Algorithm a) { return a != Algorithm::EsBaseline; }

void validate(const RunConfig& c, const std::map<std::string, int>& lines) {
  auto line_of = [&](const char* key) {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  };
  auto check = [&](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(line_of(key), msg);
  };
  check(c.iterations >= 1, "iterations", "iterations must be >= 1");
  if (uses_dual_solver(c.algorithm)) {
    check(c.gamma > 0.0, "gamma", "smoothed solver requires gamma > 0");
  }
  check(c.horizon >= 0, "horizon", "horizon must be >= 1 (0 selects the default)");
  check(c.max_step > 0.0, "max_step", "max_step must be > 0");
  check(c.n >= 2, "n", "n must be >= 2");
  check(!c.antithetic || c.n % 2 == 0, "antithetic", "antithetic requires an even n");
  check(c.sigma > 0.0, "sigma", "sigma must be > 0");
  check(c.eta > 0.0, "eta", "eta must be > 0");
  check(c.episodes >= 1, "episodes", "episodes must be >= 1");
  check(c.trajectories >= 2, "M", "M must be >= 2");
  check(c.inner_steps >= 1, "L", "L must be >= 1");
  check(c.num_features >= 1, "m", "m must be >= 1");
  check(c.sigma_rff > 0.0, "sigma_rff", "sigma_rff must be > 0");
  check(c.alpha_dual > 0.0, "alpha_dual", "alpha_dual must be > 0");
  check(c.warm_start >= 1, "warm_start", "warm_start must be >= 1");
  check(c.window >= 1, "window", "window must be >= 1");
  check(c.bins >= 2, "bins", "bins must be >= 2");
  check(c.hist_epsilon > 0.0, "hist_epsilon", "hist_epsilon must be > 0");
  check(c.probe_capacity >= 1 && c.probe_samples >= 1, "probe_capacity",
        "probe sizes must be >= 1");
  for (int h : c.hidden) check(h >= 1, "hidden", "hidden sizes must be >= 1");
  if (c.algorithm == Algorithm::Repulsion) {
    check(c.bem == BemKind::MeanXDisplacement || c.bem == BemKind::FinalState ||
              c.bem == BemKind::TotalReward,
          "bem", "repulsion requires a trajectory embedding");
  }
  if (c.algorithm == Algorithm::Imitate && c.expert == "scripted") {
    check(c.env == EnvKind::Chain, "expert", "the scripted expert exists only for env = chain");
  }
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Bges: return "bges";
    case Algorithm::BgpgOn: return "bgpg-on";
    case Algorithm::BgpgOff: return "bgpg-off";
    case Algorithm::Repulsion: return "repulsion";
    case Algorithm::Imitate: return "imitate";
    case Algorithm::EsBaseline: return "es-baseline";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::Bges, Algorithm::BgpgOn, Algorithm::BgpgOff,
                      Algorithm::Repulsion, Algorithm::Imitate, Algorithm::EsBaseline}) {
    if (to_string(a) == name) return a;
  }
  throw Error("unknown algorithm '" + std::string(name) + "'");
}

ConfigError::ConfigError(int line, const std::string& message)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

RunError::RunError(int iteration, const std::string& message)
    : Error("iteration " + std::to_string(iteration) + ": " + message), iteration_(iteration) {}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::map<std::string, int> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (lines.count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(line_no, "missing value for '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
    lines[key] = line_no;
  }
  validate(c, lines);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

EnvSpec env_spec(const RunConfig& c) {
  EnvSpec s;
  s.kind = c.env;
  s.horizon = c.horizon;
  s.max_step = c.max_step;
  s.layer_states = c.layer_states;
  s.num_actions = c.num_actions;
  s.mdp_seed = c.mdp_seed;
  s.chain_length = c.chain_length;
  s.chain_start = c.chain_start;
  s.left_reward = c.left_reward;
  s.right_reward = c.right_reward;
  return s;
}

Bem bem_for(const RunConfig& c) {
  Bem b;
  b.kind = c.bem;
  b.fixed_state = c.fixed_state;
  if (b.discrete()) {
    auto env = make_env(env_spec(c));
    require(env->discrete(), "embedding '" + std::string(to_string(c.bem)) +
                                 "' needs a discrete environment");
    b.num_states = env->num_states();
    b.num_actions = env->num_actions();
  }
  return b;
}

RegularizedObjectiveCfg objective_cfg(const RunConfig& c) {
  RegularizedObjectiveCfg o;
  o.beta = c.beta;
  o.gamma = c.gamma;
  o.alpha_dual = c.alpha_dual;
  o.dual_steps = c.warm_start;
  o.window = c.window;
  o.num_features = c.num_features;
  o.rff_bandwidth = c.sigma_rff;
  o.cost = c.cost;
  return o;
}

EsCfg es_cfg(const RunConfig& c) {
  EsCfg e;
  e.n = c.n;
  e.sigma = c.sigma;
  e.eta = c.eta;
  e.episodes = c.episodes;
  e.antithetic = c.antithetic;
  e.mode = c.es_mode;
  return e;
}

PgCfg pg_cfg(const RunConfig& c) {
  PgCfg p;
  p.trajectories = c.trajectories;
  p.inner_steps = c.inner_steps;
  p.eta = c.eta;
  p.probe_capacity = static_cast<std::size_t>(c.probe_capacity);
  p.probe_samples = static_cast<std::size_t>(c.probe_samples);
  return p;
}

Architecture architecture_for(const RunConfig& c) {
  auto env = make_env(env_spec(c));
  return Architecture{env->state_dim(), c.hidden, env->action_dim()};
}

std::vector<Eigen::VectorXd> read_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read point cloud " + path.string());
  std::vector<Eigen::VectorXd> pts;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::istringstream ss(hash == std::string::npos ? raw : raw.substr(0, hash));
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      try {
        vals.push_back(to_double(tok));
      } catch (const Error& e) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (vals.empty()) continue;
    if (!pts.empty() && static_cast<std::size_t>(pts.front().size()) != vals.size()) {
      throw DimensionError(path.string() + ":" + std::to_string(line_no) +
                           ": point dimension differs from the first line");
    }
    pts.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  if (pts.empty()) throw Error("point cloud " + path.string() + " is empty");
  return pts;
}

std::string csv_header() {
  return "iter,mean_reward,reward_std,wd_estimate,dual_objective,saturations,wall_ms,seed";
}

std::string csv_row(const IterationRecord& r) {
  return std::to_string(r.iter) + "," + fmt_double(r.mean_reward) + "," +
         fmt_double(r.reward_std) + "," + fmt_double(r.wd_estimate) + "," +
         fmt_double(r.dual_objective) + "," + std::to_string(r.saturations) + "," +
         fmt_double(r.wall_ms) + "," + std::to_string(r.seed);
}

void run_experiment(const RunConfig& c,
                    const std::function<void(const IterationRecord&)>& sink) {
  const EnvSpec spec = env_spec(c);
  const Bem bem = bem_for(c);
  const Architecture arch = architecture_for(c);
  const auto obj = objective_cfg(c);
  const auto iter_seed = [&](int t) { return derive_seed(c.seed, "iter", static_cast<std::uint64_t>(t)); };
  auto emit = [&](IterationRecord r) {
    r.seed = c.seed;
    sink(r);
  };
  auto guarded = [&](int t, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      throw RunError(t, e.what());
    }
  };
  const PolicyParams init =
      PolicyParams::random(arch, c.init_scale, c.log_std, derive_seed(c.seed, "init"));

  switch (c.algorithm) {
    case Algorithm::Bges:
    case Algorithm::Imitate: {
      BgesState st{init, std::nullopt, {}, std::nullopt, 0};
      if (c.algorithm == Algorithm::Imitate) {
        std::vector<Eigen::VectorXd> pts;
        if (c.expert == "scripted") {
          auto env = make_env(spec);
          const ActionFn right = [](const Eigen::VectorXd&, Rng&) -> Eigen::VectorXd {
            return Eigen::Vector2d(0.0, 1.0);
          };
          const Trajectory tau = rollout(*env, right, derive_seed(c.seed, "expert"));
          pts.push_back(embed_trajectory(bem, tau));
        } else {
          pts = read_point_cloud(c.expert);
        }
        st.fixed_base = EmpiricalEmbedding::merged(std::move(pts));
      }
      const auto es = es_cfg(c);
      for (int t = 0; t < c.iterations; ++t) {
        guarded(t, [&] { emit(bges_step(st, spec, bem, obj, es, iter_seed(t))); });
      }
      break;
    }
    case Algorithm::EsBaseline: {
      DivergenceEsState st{init, std::nullopt, std::nullopt, 0};
      const auto es = es_cfg(c);
      for (int t = 0; t < c.iterations; ++t) {
        guarded(t, [&] {
          emit(es_step_with_divergence(st, spec, bem, c.divergence, c.bins, c.hist_epsilon, es,
                                       c.beta, iter_seed(t)));
        });
      }
      break;
    }
    case Algorithm::BgpgOn:
    case Algorithm::BgpgOff: {
      BgpgState st{init, std::nullopt, std::nullopt, 0};
      const auto pg = pg_cfg(c);
      for (int t = 0; t < c.iterations; ++t) {
        guarded(t, [&] {
          emit(c.algorithm == Algorithm::BgpgOn
                   ? bgpg_step_onpolicy(st, spec, bem, obj, pg, iter_seed(t))
                   : bgpg_step_offpolicy(st, spec, obj, pg, iter_seed(t)));
        });
      }
      break;
    }
    case Algorithm::Repulsion: {
      RepulsionState st{
          PolicyParams::random(arch, c.init_scale, c.log_std, derive_seed(c.seed, "init-a")),
          PolicyParams::random(arch, c.init_scale, c.log_std, derive_seed(c.seed, "init-b")),
          std::nullopt, 0};
      for (int t = 0; t < c.iterations; ++t) {
        guarded(t, [&] {
          const RepulsionRecord r =
              repulsion_step(st, spec, bem, obj, c.trajectories, c.eta, iter_seed(t));
          IterationRecord merged = r.a;
          merged.mean_reward = 0.5 * (r.a.mean_reward + r.b.mean_reward);
          merged.reward_std = 0.5 * (r.a.reward_std + r.b.reward_std);
          emit(merged);
        });
      }
      break;
    }
  }
}

int run_command(const std::filesystem::path& config_path, std::ostream& err) {
  RunConfig c;
  try {
    c = load_config(config_path);
    // surface environment/embedding mismatches as configuration errors
    bem_for(c);
    architecture_for(c);
  } catch (const ConfigError& e) {
    err << "config error: " << config_path.string() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "config error: " << config_path.string() << ": " << e.what() << "\n";
    return 2;
  }
  std::ofstream out(c.output);
  if (!out) {
    err << "error: cannot write " << c.output << "\n";
    return 1;
  }
  out << csv_header() << "\n";
  try {
    run_experiment(c, [&](const IterationRecord& r) { out << csv_row(r) << "\n" << std::flush; });
  } catch (const RunError& e) {
    err << "run failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bgrl
