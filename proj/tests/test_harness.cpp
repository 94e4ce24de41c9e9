#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spinlab/errors.hpp"
#include "spinlab/harness.hpp"

using namespace spinlab;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.model = ModelParams{10, 1.0, 2.0, 1.0, 4, 5, 99};
  cfg.laws = {"gaussian", "rademacher", "gaussian"};
  cfg.replicas = 4;
  cfg.n_sweep = {6, 9};
  cfg.kappa_sweep = {2, 4, 10};
  cfg.bootstrap = 50;
  cfg.phi_draws = 3;
  cfg.norm_n = 20;
  cfg.norm_seeds = 2;
  cfg.lindeberg_instances = 20;
  cfg.lindeberg_mc_instances = 2;
  cfg.lindeberg_mc_samples = 5000;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("spinlab_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config round trip and hash") {
  const auto cfg = tiny_config();
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.hash() == cfg.hash());
  auto other = cfg;
  other.model.master_seed += 1;
  CHECK(other.hash() != cfg.hash());
  CHECK(cfg.a2_value() == doctest::Approx(2.5));
  other.a2 = 3.0;
  CHECK(ExperimentConfig::from_json(other.to_json()).a2_value() == 3.0);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"betta", 1.0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"beta", "one"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"replicas", -3}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"beta", -1.0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"laws", json::array({"gaussian", "student"})}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"initial", "uniform:3"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"initial", "uniform:x"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"potential", "harmonic"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"gamma", 2.5}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::array()), ConfigError);
  CHECK_NOTHROW(ExperimentConfig::from_json(json{{"beta", 0.5}, {"initial", "point:0"}, {"a2", nullptr}}));

  const auto path = std::filesystem::temp_directory_path() / "spinlab_bad.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_config(path), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("seed precedence") {
  auto cfg = tiny_config();
  ::unsetenv("SPINLAB_SEED");
  apply_seed_override(cfg, std::nullopt);
  CHECK(cfg.model.master_seed == 99);
  ::setenv("SPINLAB_SEED", "1234", 1);
  apply_seed_override(cfg, std::nullopt);
  CHECK(cfg.model.master_seed == 1234);
  apply_seed_override(cfg, 7);
  CHECK(cfg.model.master_seed == 7);
  ::setenv("SPINLAB_SEED", "12x", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg, std::nullopt), ConfigError);
  ::unsetenv("SPINLAB_SEED");
}

TEST_CASE("law labels disambiguate repeats") {
  const auto labels = tiny_config().law_labels();
  CHECK(labels == std::vector<std::string>{"gaussian", "rademacher", "gaussian#2"});
}

TEST_CASE("universality run shape and determinism") {
  const auto cfg = tiny_config();
  const auto one = run_universality(cfg, {1, false});
  const std::size_t points = cfg.model.steps() + 1;
  CHECK(one.autocorr.size() == cfg.laws.size() * cfg.n_sweep.size() * points);
  CHECK(one.gaps.size() == (cfg.laws.size() - 1) * cfg.n_sweep.size());
  CHECK(one.norms.size() == cfg.laws.size() * cfg.n_sweep.size() * cfg.replicas);
  for (const auto& g : one.gaps) {
    CHECK(g.sup_gap >= 0.0);
    CHECK(g.noise_floor > 0.0);
    CHECK(g.w2_surrogate > 0.0);
  }
  CHECK(one.info.contains("config_hash"));
  CHECK(one.info["seeds"]["6"]["disorder"]["rademacher"].size() == cfg.replicas);

  const auto three = run_universality(cfg, {3, false});
  const auto d1 = scratch("u1"), d3 = scratch("u3");
  write_outputs(one, cfg, d1, 0.0);
  write_outputs(three, cfg, d3, 1.0);
  for (const char* f : {"autocorr.csv", "gaps.csv", "norms.csv"}) CHECK(slurp(d1 / f) == slurp(d3 / f));
  CHECK(slurp(d1 / "config.json") == slurp(d3 / "config.json"));
  CHECK(slurp(d1 / "autocorr.csv").rfind("law,N,replica_count,t,mean,stderr\n", 0) == 0);
  CHECK(slurp(d1 / "gaps.csv").rfind("law,N,sup_gap,w2_surrogate,noise_floor\n", 0) == 0);
}

TEST_CASE("universality needs a gaussian reference and two laws") {
  auto cfg = tiny_config();
  cfg.laws = {"rademacher", "cexp"};
  CHECK_THROWS_AS(run_universality(cfg, {}), ConfigError);
  cfg.laws = {"gaussian"};
  CHECK_THROWS_AS(run_universality(cfg, {}), ConfigError);
}

TEST_CASE("replay reproduces stored trajectories") {
  auto cfg = tiny_config();
  cfg.n_sweep = {6};
  const auto run = run_universality(cfg, {2, true});
  const auto path = replay_trajectory(cfg, {"gaussian#2", 6, 3, 4});
  REQUIRE(path.size() == cfg.model.steps() + 1);
  std::istringstream lines(run.paths_csv);
  std::string line;
  std::size_t matched = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("gaussian#2,6,3,4,", 0) != 0) continue;
    const std::string expect = "gaussian#2,6,3,4," + format_double(path[matched].first) + "," +
                               format_double(path[matched].second);
    CHECK(line == expect);
    ++matched;
  }
  CHECK(matched == path.size());
  CHECK_THROWS_AS(replay_trajectory(cfg, {"student", 6, 0, 0}), ConfigError);
  CHECK_THROWS_AS(replay_trajectory(cfg, {"gaussian", 6, 0, 6}), ConfigError);
}

TEST_CASE("simulate matches replay of replica zero") {
  auto cfg = tiny_config();
  const auto sim = run_simulate(cfg, {1, true});
  const auto path = replay_trajectory(cfg, {"gaussian", cfg.model.n_particles, 0, 2});
  std::istringstream lines(sim.paths_csv);
  std::string line;
  std::size_t matched = 0;
  while (std::getline(lines, line))
    if (line.rfind("gaussian,10,0,2,", 0) == 0) {
      CHECK(line == "gaussian,10,0,2," + format_double(path[matched].first) + "," + format_double(path[matched].second));
      ++matched;
    }
  CHECK(matched == path.size());
  CHECK(sim.autocorr.size() == cfg.model.steps() + 1);
}

TEST_CASE("freeze sweep") {
  const auto cfg = tiny_config();
  const auto run = run_freeze_sweep(cfg, {2, false});
  REQUIRE(run.freeze.size() == 3);
  for (const auto& f : run.freeze) {
    CHECK(f.msd_mean >= 0.0);
    CHECK(f.replicas == cfg.replicas);
  }
  CHECK(run.freeze.back().kappa == 10);
  // kappa = G means every step refreshes the field: identical to full.
  auto full_kappa = cfg;
  full_kappa.kappa_sweep = {20};
  CHECK(run_freeze_sweep(full_kappa, {1, false}).freeze.front().msd_mean == 0.0);
  CHECK(run.phi.size() == cfg.n_sweep.size());

  auto bad = cfg;
  bad.kappa_sweep = {3};
  CHECK_THROWS_AS(run_freeze_sweep(bad, {}), ConfigError);
}

TEST_CASE("validation and certificate suites") {
  const auto cfg = tiny_config();
  const auto v = run_validation(cfg, {1, false});
  CHECK(v.ok);
  CHECK(v.norms.size() == cfg.laws.size() * cfg.norm_seeds);
  bool conf = false;
  for (const auto& r : v.validation)
    if (r.check == "confinement_upper") conf = r.verdict == "PASS";
  CHECK(conf);

  const auto l = run_lindeberg_suite(cfg, {2, false});
  CHECK(l.ok);
  REQUIRE(l.lindeberg.has_value());
  CHECK(l.lindeberg->instances.size() == 20);
  CHECK(l.lindeberg->mc_checked == 2);
  const auto dir = scratch("lind");
  write_outputs(l, cfg, dir, 0.0);
  CHECK(std::filesystem::exists(dir / "lindeberg.csv"));
  const auto summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["ok"] == true);
  CHECK(summary.contains("timestamp"));
  CHECK(summary["config_hash"] == cfg.hash());
}

TEST_CASE("csv number formatting round trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567})
    CHECK(std::stod(format_double(v)) == v);
}
