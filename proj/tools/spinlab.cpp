// spinlab command line: runs one experiment per invocation and writes its
// results under the output directory.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spinlab/errors.hpp"
#include "spinlab/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spinlab: soft-spin glass Langevin simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool store_paths = false;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "master seed (overrides config and SPINLAB_SEED)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--store-paths", store_paths, "also write every trajectory to paths.csv");

  auto* simulate = app.add_subcommand("simulate", "one full-dynamics run for the first law");
  std::uint64_t sim_replica = 0;
  simulate->add_option("--replica", sim_replica, "replica index");
  app.add_subcommand("universality", "autocorrelation gaps across laws and N");
  app.add_subcommand("freeze-sweep", "coupled frozen dynamics across kappa, and the Phi trend");
  app.add_subcommand("validate", "disorder law checks, operator norms and confinement");
  app.add_subcommand("lindeberg", "Lindeberg and determinant certificate suite");
  auto* replay = app.add_subcommand("replay", "re-derive one universality trajectory as t,x CSV");
  spinlab::ReplayRequest req;
  std::optional<std::uint64_t> expect_hash;
  replay->add_option("--law", req.law, "law label, e.g. rademacher or gaussian#2")->required();
  replay->add_option("--n", req.n, "number of particles")->required();
  replay->add_option("--replica", req.replica, "replica index")->required();
  replay->add_option("--particle", req.particle, "particle index")->required();
  replay->add_option("--hash", expect_hash, "expected config hash from summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    auto cfg = config_path.empty() ? spinlab::ExperimentConfig{} : spinlab::load_config(config_path);
    spinlab::apply_seed_override(cfg, seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();
    const spinlab::RunOptions opts{threads, store_paths};

    if (replay->parsed()) {
      if (expect_hash && *expect_hash != cfg.hash())
        throw spinlab::ConfigError("config hash " + std::to_string(cfg.hash()) + " does not match --hash " +
                                   std::to_string(*expect_hash));
      std::cout << "t,x\n";
      for (const auto& [t, x] : spinlab::replay_trajectory(cfg, req))
        std::cout << spinlab::format_double(t) << "," << spinlab::format_double(x) << "\n";
      return 0;
    }

    const auto start = std::chrono::steady_clock::now();
    spinlab::RunSummary summary;
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "simulate") summary = spinlab::run_simulate(cfg, opts, sim_replica);
    else if (name == "universality") summary = spinlab::run_universality(cfg, opts);
    else if (name == "freeze-sweep") summary = spinlab::run_freeze_sweep(cfg, opts);
    else if (name == "validate") summary = spinlab::run_validation(cfg, opts);
    else summary = spinlab::run_lindeberg_suite(cfg, opts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    spinlab::write_outputs(summary, cfg, cfg.output_dir, wall);
    std::cout << name << ": " << (summary.ok ? "ok" : "FAIL") << " (" << wall << " s) -> " << cfg.output_dir << "\n";
    for (const auto& f : summary.failures) std::cerr << "  " << f << "\n";
    return summary.ok ? 0 : kExitNumerical;
  } catch (const spinlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const spinlab::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
