#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bgrl/algorithms.hpp"
#include "bgrl/baselines.hpp"
#include "bgrl/embed.hpp"
#include "bgrl/envsim.hpp"
#include "bgrl/error.hpp"

namespace bgrl {

enum class Algorithm { Bges, BgpgOn, BgpgOff, Repulsion, Imitate, EsBaseline };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

// Flat experiment description; one `key = value` per line in the file.
struct RunConfig {
  Algorithm algorithm = Algorithm::Bges;

  EnvKind env = EnvKind::DeceptivePoint;
  int horizon = 0;
  double max_step = 0.3;
  int layer_states = 3;
  int num_actions = 2;
  std::uint64_t mdp_seed = 0;
  int chain_length = 8;
  int chain_start = 2;
  double left_reward = 0.1;
  double right_reward = 1.0;

  BemKind bem = BemKind::FinalState;
  int fixed_state = 0;
  CostKind cost = CostKind::L2;

  double gamma = 0.1;
  double beta = 0.5;
  double eta = 0.001;
  double sigma = 0.1;
  int n = 8;
  int episodes = 1;
  bool antithetic = false;
  ActionMode es_mode = ActionMode::Mean;
  int trajectories = 16;
  int inner_steps = 5;
  int iterations = 10;

  int num_features = 100;
  double sigma_rff = 1.0;
  double alpha_dual = 0.03;
  int warm_start = 100;
  int window = 2;

  std::vector<int> hidden{5, 5};
  double log_std = -0.5;
  double init_scale = 0.3;

  DivergenceKind divergence = DivergenceKind::None;
  int bins = 16;
  double hist_epsilon = 1e-6;
  int probe_capacity = 2000;
  int probe_samples = 64;
  // "scripted" (Chain only) or a point-cloud file of expert embeddings
  std::string expert = "scripted";

  std::uint64_t seed = 0;
  std::string output = "metrics.csv";

  bool operator==(const RunConfig&) const = default;
};

// Malformed or invalid configuration; `line` is 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

EnvSpec env_spec(const RunConfig& config);
Bem bem_for(const RunConfig& config);
RegularizedObjectiveCfg objective_cfg(const RunConfig& config);
EsCfg es_cfg(const RunConfig& config);
PgCfg pg_cfg(const RunConfig& config);
Architecture architecture_for(const RunConfig& config);

// Whitespace-separated floats, one point per line; blank lines and '#'
// comments are skipped.
std::vector<Eigen::VectorXd> read_point_cloud(const std::filesystem::path& path);

std::string csv_header();
std::string csv_row(const IterationRecord& rec);

// Failure inside the iteration loop.
class RunError : public Error {
 public:
  RunError(int iteration, const std::string& message);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Runs config.iterations iterations, calling sink after each. Iteration t
// uses seed derive_seed(config.seed, "iter", t).
void run_experiment(const RunConfig& config,
                    const std::function<void(const IterationRecord&)>& sink);

// `run` subcommand: writes the CSV to config.output. Returns the exit code
// (0 ok, 1 runtime failure, 2 bad config).
int run_command(const std::filesystem::path& config_path, std::ostream& err);

}  // namespace bgrl
