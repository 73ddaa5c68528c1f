// bgrl: run experiments, verification suites and point-cloud distances.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "bgrl/config.hpp"
#include "bgrl/error.hpp"
#include "bgrl/transport.hpp"
#include "bgrl/verify.hpp"

namespace {

int cmd_verify(const std::string& suite) {
  bgrl::SuiteReport rep;
  try {
    rep = bgrl::run_suite(suite);
  } catch (const bgrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  for (const auto& line : rep.lines) std::cout << line << "\n";
  std::cout << rep.name << ": " << rep.passed << " passed, " << rep.failed << " failed\n";
  return rep.ok() ? 0 : 1;
}

struct WdArgs {
  std::string file_a;
  std::string file_b;
  double gamma = 0.5;
  std::string cost = "l2";
  int iterations = 50000;
  int features = 500;
  double bandwidth = 2.0;
  double alpha = 0.3;
  std::uint64_t seed = 0;
};

int cmd_wd(const WdArgs& args) {
  try {
    const auto cost = bgrl::parse_cost_kind(args.cost);
    bgrl::require(args.gamma > 0.0, "smoothed solver requires gamma > 0");
    const bgrl::EmpiricalEmbedding a(bgrl::read_point_cloud(args.file_a));
    const bgrl::EmpiricalEmbedding b(bgrl::read_point_cloud(args.file_b));
    bgrl::require_dim(a.dim() == b.dim(), "point clouds differ in dimension");
    if (a.size() <= bgrl::kMaxExactSupport && b.size() <= bgrl::kMaxExactSupport) {
      std::printf("exact_ot %.17g\n", bgrl::exact_ot_discrete(a, b, cost).value);
    } else {
      std::printf("exact_ot skipped (support above %zu)\n", bgrl::kMaxExactSupport);
    }
    const auto sk = bgrl::sinkhorn_oracle(a, b, cost, args.gamma, 100000);
    std::printf("sinkhorn %.17g%s\n", sk.value, sk.converged ? "" : " (not converged)");
    auto pot = bgrl::make_potentials(a.dim(), b.dim(), args.features, args.bandwidth,
                                     args.gamma, args.alpha, args.seed);
    pot = bgrl::wd_solve(a, b, cost, args.iterations, pot, bgrl::derive_seed(args.seed, "wd"));
    std::printf("dual_estimate %.17g\n", bgrl::wd_estimate_exact(pot, a, b, cost));
    std::printf("saturations %lld\n", static_cast<long long>(pot.saturations));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-guided reinforcement learning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a key=value config");
  run->add_option("config", config_path, "config file")->required();

  std::string suite;
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "transport | theorem1 | lemma-equality | gradients")
      ->required();

  WdArgs wd;
  auto* wdc = app.add_subcommand("wd", "smoothed Wasserstein distance between two point clouds");
  wdc->add_option("fileA", wd.file_a, "points, one per line")->required();
  wdc->add_option("fileB", wd.file_b, "points, one per line")->required();
  wdc->add_option("--gamma", wd.gamma, "smoothing strength (> 0)");
  wdc->add_option("--cost", wd.cost, "l1 | l2 | sql2 | sqabs");
  wdc->add_option("--iterations", wd.iterations, "dual SGD steps");
  wdc->add_option("--features", wd.features, "random features per side");
  wdc->add_option("--bandwidth", wd.bandwidth, "RBF bandwidth");
  wdc->add_option("--alpha", wd.alpha, "dual step scale");
  wdc->add_option("--seed", wd.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*run) return bgrl::run_command(config_path, std::cerr);
  if (*verify) return cmd_verify(suite);
  if (*wdc) return cmd_wd(wd);
  return 2;
}
