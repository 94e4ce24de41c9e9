#pragma once
//
// Experiment orchestration: configuration, the universality and freeze
// sweeps, validation and certificate suites, and persistence of results.
//

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinlab/disorder.hpp"
#include "spinlab/lindeberg.hpp"
#include "spinlab/model.hpp"

namespace spinlab {

struct ExperimentConfig {
  ModelParams model{100, 1.0, 2.0, 2.0, 10, 20, 20240601};
  std::string potential = "double_well";  // double_well | log_barrier
  std::string initial = "uniform:1";      // uniform:<a> | point:<x0>
  std::vector<std::string> laws = {"gaussian", "rademacher"};
  std::string freeze_law = "rademacher";
  std::size_t replicas = 20;
  std::vector<std::size_t> n_sweep = {25, 50, 100, 200};
  std::vector<std::size_t> kappa_sweep = {5, 10, 20, 40};
  double rho = 0.1;
  std::optional<double> a2;  // defaults to 2 beta + 1/2
  double eps = 0.05;
  double c1 = 1.0;
  double gamma = 2.25;
  std::string output_dir = "out";
  std::size_t norm_n = 400;
  std::size_t norm_seeds = 20;
  std::size_t bootstrap = 500;
  std::size_t phi_draws = 30;
  std::size_t lindeberg_instances = 500;
  std::size_t lindeberg_max_kappa = 3;
  std::size_t lindeberg_max_n = 12;
  std::size_t lindeberg_mc_instances = 50;
  std::size_t lindeberg_mc_samples = 1000000;
  double confinement_threshold = 1e3;

  // Unknown keys and invalid values raise ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;

  double a2_value() const { return a2.value_or(2.0 * model.beta + 0.5); }
  std::uint64_t hash() const;

  Potential make_potential() const;
  InitialLaw make_initial() const;
  std::vector<DisorderLaw> make_laws() const;
  // Law names with "#k" suffixes on repeats, used as CSV keys.
  std::vector<std::string> law_labels() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// Seed precedence: explicit override, then SPINLAB_SEED, then the file.
void apply_seed_override(ExperimentConfig& cfg, std::optional<std::uint64_t> cli_seed);

struct RunOptions {
  std::size_t threads = 1;
  bool store_paths = false;
};

struct AutocorrRow {
  std::string law;
  std::size_t n = 0;
  std::size_t replica_count = 0;
  double t = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct GapRow {
  std::string law;
  std::size_t n = 0;
  double sup_gap = 0.0;
  double gap_stderr = 0.0;  // bootstrap
  double w2_surrogate = 0.0;
  double noise_floor = 0.0;  // 99th percentile of the bootstrap null sup
};

struct FreezeRow {
  std::size_t kappa = 0;
  std::size_t n = 0;
  double msd_mean = 0.0;
  double msd_stderr = 0.0;
  std::size_t envelope_violations = 0;
  std::size_t replicas_in_event = 0;
  std::size_t replicas = 0;
};

struct PhiRow {
  std::size_t n = 0;
  std::size_t kappa = 0;
  std::size_t draws = 0;
  double median = 0.0;
  double mean = 0.0;
};

struct NormRow {
  std::string law;
  std::size_t n = 0;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double beta = 1.0;
  double norm = 0.0;  // ||(beta/sqrt(N)) J||_{2->2}
  bool in_event = false;  // norm <= a2
};

struct ValidationTableRow {
  std::string subject;
  std::string check;
  std::string verdict;
  double value = 0.0;
  double reference = 0.0;
  std::string detail;
};

struct RunSummary {
  std::string command;
  bool ok = true;
  std::vector<std::string> failures;
  nlohmann::json info;  // seeds, config hash, scalar results

  std::vector<AutocorrRow> autocorr;
  std::vector<GapRow> gaps;
  std::vector<FreezeRow> freeze;
  std::vector<PhiRow> phi;
  std::vector<NormRow> norms;
  std::vector<ValidationTableRow> validation;
  std::optional<CertificateResult> lindeberg;
  std::string paths_csv;
};

RunSummary run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t replica = 0);
RunSummary run_universality(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_freeze_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_validation(const ExperimentConfig& cfg, const RunOptions& opts);
RunSummary run_lindeberg_suite(const ExperimentConfig& cfg, const RunOptions& opts);

struct ReplayRequest {
  std::string law;  // label as in law_labels()
  std::size_t n = 0;
  std::uint64_t replica = 0;
  std::size_t particle = 0;
};

// Re-derives one trajectory of the universality experiment.
std::vector<std::pair<double, double>> replay_trajectory(const ExperimentConfig& cfg, const ReplayRequest& req);

// Seeds used by the universality experiment.
std::uint64_t universality_brownian_seed(const ExperimentConfig& cfg, std::size_t n);
std::uint64_t universality_disorder_seed(const ExperimentConfig& cfg, std::size_t law_index, std::size_t n,
                                         std::uint64_t replica);

// Writes config.json, summary.json and every CSV the summary carries.
// Only summary.json holds wall-clock data.
void write_outputs(const RunSummary& summary, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                   double wall_seconds);

std::string format_double(double v);

}  // namespace spinlab
