#include "spinlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spinlab/dynamics.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/observables.hpp"
#include "spinlab/parallel.hpp"

namespace spinlab {

using nlohmann::json;

namespace {

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::size_t> as_counts(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(as_count(e, key));
  return out;
}

std::vector<std::string> as_strings(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(as_string(e, key));
  return out;
}

double parse_real(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number in " + what + ": '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("trailing characters in " + what + ": '" + text + "'");
  return v;
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Standard error of the mean; zero for a single value.
double stderr_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ModelParams params_for(const ExperimentConfig& cfg, std::size_t n, std::uint64_t master) {
  ModelParams p = cfg.model;
  p.n_particles = n;
  p.master_seed = master;
  return p;
}

void append_paths(std::string& out, const std::string& law, const PathEnsemble& ens, std::uint64_t replica) {
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    for (std::size_t g = 0; g < ens.points(); ++g) {
      out += law + "," + std::to_string(ens.particles()) + "," + std::to_string(replica) + "," + std::to_string(i) +
             "," + format_double(ens.grid[g]) + "," + format_double(ens.at(i, g)) + "\n";
    }
  }
}

std::size_t reference_index(const std::vector<DisorderLaw>& laws) {
  for (std::size_t l = 0; l < laws.size(); ++l)
    if (laws[l].kind() == DisorderLaw::Kind::StandardGaussian) return l;
  throw ConfigError("universality needs a gaussian entry in 'laws' as reference");
}

json base_info(const ExperimentConfig& cfg, const std::string& command) {
  json info;
  info["command"] = command;
  info["config_hash"] = cfg.hash();
  info["seed"] = cfg.model.master_seed;
  return info;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// configuration

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "n_particles") c.model.n_particles = as_count(v, key);
    else if (key == "beta") c.model.beta = as_real(v, key);
    else if (key == "s_bound") c.model.s_bound = as_real(v, key);
    else if (key == "horizon") c.model.horizon = as_real(v, key);
    else if (key == "kappa") c.model.kappa = as_count(v, key);
    else if (key == "substeps") c.model.substeps = as_count(v, key);
    else if (key == "seed") c.model.master_seed = as_count(v, key);
    else if (key == "potential") c.potential = as_string(v, key);
    else if (key == "initial") c.initial = as_string(v, key);
    else if (key == "laws") c.laws = as_strings(v, key);
    else if (key == "freeze_law") c.freeze_law = as_string(v, key);
    else if (key == "replicas") c.replicas = as_count(v, key);
    else if (key == "n_sweep") c.n_sweep = as_counts(v, key);
    else if (key == "kappa_sweep") c.kappa_sweep = as_counts(v, key);
    else if (key == "rho") c.rho = as_real(v, key);
    else if (key == "a2") c.a2 = v.is_null() ? std::nullopt : std::optional<double>(as_real(v, key));
    else if (key == "eps") c.eps = as_real(v, key);
    else if (key == "c1") c.c1 = as_real(v, key);
    else if (key == "gamma") c.gamma = as_real(v, key);
    else if (key == "output_dir") c.output_dir = as_string(v, key);
    else if (key == "norm_n") c.norm_n = as_count(v, key);
    else if (key == "norm_seeds") c.norm_seeds = as_count(v, key);
    else if (key == "bootstrap") c.bootstrap = as_count(v, key);
    else if (key == "phi_draws") c.phi_draws = as_count(v, key);
    else if (key == "lindeberg_instances") c.lindeberg_instances = as_count(v, key);
    else if (key == "lindeberg_max_kappa") c.lindeberg_max_kappa = as_count(v, key);
    else if (key == "lindeberg_max_n") c.lindeberg_max_n = as_count(v, key);
    else if (key == "lindeberg_mc_instances") c.lindeberg_mc_instances = as_count(v, key);
    else if (key == "lindeberg_mc_samples") c.lindeberg_mc_samples = as_count(v, key);
    else if (key == "confinement_threshold") c.confinement_threshold = as_real(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["n_particles"] = model.n_particles;
  j["beta"] = model.beta;
  j["s_bound"] = model.s_bound;
  j["horizon"] = model.horizon;
  j["kappa"] = model.kappa;
  j["substeps"] = model.substeps;
  j["seed"] = model.master_seed;
  j["potential"] = potential;
  j["initial"] = initial;
  j["laws"] = laws;
  j["freeze_law"] = freeze_law;
  j["replicas"] = replicas;
  j["n_sweep"] = n_sweep;
  j["kappa_sweep"] = kappa_sweep;
  j["rho"] = rho;
  j["a2"] = a2 ? json(*a2) : json(nullptr);
  j["eps"] = eps;
  j["c1"] = c1;
  j["gamma"] = gamma;
  j["output_dir"] = output_dir;
  j["norm_n"] = norm_n;
  j["norm_seeds"] = norm_seeds;
  j["bootstrap"] = bootstrap;
  j["phi_draws"] = phi_draws;
  j["lindeberg_instances"] = lindeberg_instances;
  j["lindeberg_max_kappa"] = lindeberg_max_kappa;
  j["lindeberg_max_n"] = lindeberg_max_n;
  j["lindeberg_mc_instances"] = lindeberg_mc_instances;
  j["lindeberg_mc_samples"] = lindeberg_mc_samples;
  j["confinement_threshold"] = confinement_threshold;
  return j;
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
    (void)make_potential();
    (void)make_initial();
    (void)make_laws();
    (void)DisorderLaw::from_spec(freeze_law);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (laws.empty()) throw ConfigError("'laws' must not be empty");
  if (replicas == 0) throw ConfigError("'replicas' must be >= 1");
  if (n_sweep.empty() || std::find(n_sweep.begin(), n_sweep.end(), std::size_t{0}) != n_sweep.end())
    throw ConfigError("'n_sweep' must be non-empty with positive entries");
  if (kappa_sweep.empty() || std::find(kappa_sweep.begin(), kappa_sweep.end(), std::size_t{0}) != kappa_sweep.end())
    throw ConfigError("'kappa_sweep' must be non-empty with positive entries");
  if (!(rho > 0.0)) throw ConfigError("'rho' must be > 0");
  if (a2 && !(*a2 > 0.0)) throw ConfigError("'a2' must be > 0");
  if (!(eps > 0.0)) throw ConfigError("'eps' must be > 0");
  if (!(c1 >= 0.0)) throw ConfigError("'c1' must be >= 0");
  if (!(gamma > 1.0 && gamma < 2.5)) throw ConfigError("'gamma' must lie in (1, 2.5)");
  if (norm_n == 0) throw ConfigError("'norm_n' must be >= 1");
  if (bootstrap < 2) throw ConfigError("'bootstrap' must be >= 2");
  if (phi_draws == 0) throw ConfigError("'phi_draws' must be >= 1");
  if (lindeberg_max_kappa == 0 || lindeberg_max_n == 0 || lindeberg_max_n > 20)
    throw ConfigError("lindeberg instance sizes must satisfy kappa >= 1 and 1 <= N <= 20");
  if (lindeberg_mc_instances > 0 && lindeberg_mc_samples < 1000)
    throw ConfigError("'lindeberg_mc_samples' must be >= 1000");
  if (!(confinement_threshold > 0.0)) throw ConfigError("'confinement_threshold' must be > 0");
}

std::uint64_t ExperimentConfig::hash() const { return hash_tag(to_json().dump()); }

Potential ExperimentConfig::make_potential() const {
  if (potential == "double_well") return Potential::double_well(model.s_bound);
  if (potential == "log_barrier") return Potential::log_barrier(model.s_bound);
  throw ConfigError("unknown potential '" + potential + "' (double_well, log_barrier)");
}

InitialLaw ExperimentConfig::make_initial() const {
  const auto colon = initial.find(':');
  if (colon == std::string::npos) throw ConfigError("initial law must look like 'uniform:<a>' or 'point:<x0>'");
  const std::string kind = initial.substr(0, colon);
  const double value = parse_real(initial.substr(colon + 1), "initial law");
  try {
    if (kind == "uniform") return InitialLaw::uniform(value, model.s_bound);
    if (kind == "point") return InitialLaw::point_mass(value, model.s_bound);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown initial law '" + kind + "' (uniform, point)");
}

std::vector<DisorderLaw> ExperimentConfig::make_laws() const {
  std::vector<DisorderLaw> out;
  for (const auto& spec : laws) out.push_back(DisorderLaw::from_spec(spec));
  return out;
}

std::vector<std::string> ExperimentConfig::law_labels() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < laws.size(); ++l) {
    const std::string name = DisorderLaw::from_spec(laws[l]).name();
    std::size_t seen = 0;
    for (std::size_t k = 0; k < l; ++k)
      if (DisorderLaw::from_spec(laws[k]).name() == name) ++seen;
    out.push_back(seen == 0 ? name : name + "#" + std::to_string(seen + 1));
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

void apply_seed_override(ExperimentConfig& cfg, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) {
    cfg.model.master_seed = *cli_seed;
    return;
  }
  const char* env = std::getenv("SPINLAB_SEED");
  if (env == nullptr || *env == '\0') return;
  const std::string text(env);
  if (text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("SPINLAB_SEED must be an unsigned integer, got '" + text + "'");
  try {
    cfg.model.master_seed = std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("SPINLAB_SEED out of range: '" + text + "'");
  }
}

// ---------------------------------------------------------------------------
// seeds

std::uint64_t universality_brownian_seed(const ExperimentConfig& cfg, std::size_t n) {
  return derive_seed(cfg.model.master_seed, {hash_tag("universality-brownian"), n});
}

std::uint64_t universality_disorder_seed(const ExperimentConfig& cfg, std::size_t law_index, std::size_t n,
                                         std::uint64_t replica) {
  return derive_seed(cfg.model.master_seed, {hash_tag("universality-disorder"), law_index, n, replica});
}

// ---------------------------------------------------------------------------

RunSummary run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t replica) {
  RunSummary out;
  out.command = "simulate";
  out.info = base_info(cfg, out.command);
  const auto laws = cfg.make_laws();
  const auto labels = cfg.law_labels();
  const auto pot = cfg.make_potential();
  const auto init = cfg.make_initial();
  const std::size_t n = cfg.model.n_particles;

  const auto params = params_for(cfg, n, universality_brownian_seed(cfg, n));
  const auto dseed = universality_disorder_seed(cfg, 0, n, replica);
  const auto mat = sample_matrix(laws[0], n, dseed, opts.threads);
  const auto ens = simulate_full(params, pot, mat, init, replica);
  const auto corr = autocorrelation(ens);
  for (std::size_t g = 0; g < ens.points(); ++g) out.autocorr.push_back({labels[0], n, 1, ens.grid[g], corr[g], 0.0});

  const auto norm = operator_norm(mat, cfg.model.beta, 1e-6);
  out.norms.push_back({labels[0], n, static_cast<std::size_t>(replica), dseed, cfg.model.beta, norm.value,
                       norm.value <= cfg.a2_value()});
  if (opts.store_paths) append_paths(out.paths_csv, labels[0], ens, replica);

  out.info["law"] = labels[0];
  out.info["replica"] = replica;
  out.info["brownian_seed"] = params.master_seed;
  out.info["disorder_seed"] = dseed;
  out.info["safeguard_activations"] = ens.safeguard_activations;
  return out;
}

RunSummary run_universality(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunSummary out;
  out.command = "universality";
  out.info = base_info(cfg, out.command);
  const auto laws = cfg.make_laws();
  const auto labels = cfg.law_labels();
  if (laws.size() < 2) throw ConfigError("universality needs at least two laws");
  if (cfg.replicas < 2) throw ConfigError("universality needs at least two replicas");
  const std::size_t ref = reference_index(laws);
  const auto pot = cfg.make_potential();
  const auto init = cfg.make_initial();
  const std::size_t nl = laws.size();
  const std::size_t nr = cfg.replicas;
  const double a2 = cfg.a2_value();

  json seeds = json::object();
  std::size_t activations = 0;
  out.info["reference"] = labels[ref];

  for (std::size_t n : cfg.n_sweep) {
    const auto params = params_for(cfg, n, universality_brownian_seed(cfg, n));
    const std::size_t points = params.steps() + 1;
    const auto grid = grid_times(params);

    // Slots indexed [law * nr + replica].
    std::vector<std::vector<double>> corr(nl * nr);
    std::vector<double> w2sq(nl * nr, 0.0);
    std::vector<NormRow> norms(nl * nr);
    std::vector<std::size_t> act(nr, 0);
    std::vector<std::string> paths(opts.store_paths ? nr : 0);

    parallel_for(nr, opts.threads, [&](std::size_t r) {
      std::vector<PathEnsemble> ens;
      ens.reserve(nl);
      for (std::size_t l = 0; l < nl; ++l) {
        const auto dseed = universality_disorder_seed(cfg, l, n, r);
        const auto mat = sample_matrix(laws[l], n, dseed, 1);
        ens.push_back(simulate_full(params, pot, mat, init, r));
        corr[l * nr + r] = autocorrelation(ens.back());
        act[r] += ens.back().safeguard_activations;
        const auto norm = operator_norm(mat, params.beta, 1e-6);
        norms[l * nr + r] = {labels[l], n, r, dseed, params.beta, norm.value, norm.value <= a2};
        if (opts.store_paths) append_paths(paths[r], labels[l], ens.back(), r);
      }
      for (std::size_t l = 0; l < nl; ++l) {
        if (l == ref) continue;
        const double w = marginal_w2_distance(std::span(&ens[l], 1), std::span(&ens[ref], 1));
        w2sq[l * nr + r] = w * w;
      }
    });

    for (std::size_t r = 0; r < nr; ++r) activations += act[r];
    for (const auto& p : paths) out.paths_csv += p;
    out.norms.insert(out.norms.end(), norms.begin(), norms.end());

    std::vector<double> column(nr);
    for (std::size_t l = 0; l < nl; ++l) {
      for (std::size_t g = 0; g < points; ++g) {
        for (std::size_t r = 0; r < nr; ++r) column[r] = corr[l * nr + r][g];
        out.autocorr.push_back({labels[l], n, nr, grid[g], mean_of(column), stderr_of(column)});
      }
    }

    json nseeds;
    nseeds["brownian"] = params.master_seed;
    for (std::size_t l = 0; l < nl; ++l) {
      std::vector<std::uint64_t> ds(nr);
      for (std::size_t r = 0; r < nr; ++r) ds[r] = universality_disorder_seed(cfg, l, n, r);
      nseeds["disorder"][labels[l]] = ds;
    }

    for (std::size_t l = 0; l < nl; ++l) {
      if (l == ref) continue;
      // Paired replica differences share Brownian paths and initial values.
      std::vector<double> diff(nr * points);
      std::vector<double> mean_diff(points, 0.0);
      for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t g = 0; g < points; ++g) {
          diff[r * points + g] = corr[l * nr + r][g] - corr[ref * nr + r][g];
          mean_diff[g] += diff[r * points + g];
        }
      double gap = 0.0;
      for (double& v : mean_diff) {
        v /= static_cast<double>(nr);
        gap = std::max(gap, std::abs(v));
      }

      const std::uint64_t bseed = derive_seed(cfg.model.master_seed, {hash_tag("bootstrap"), n, l});
      nseeds["bootstrap"][labels[l]] = bseed;
      const CounterRng brng(bseed);
      std::vector<double> sup(cfg.bootstrap), centered(cfg.bootstrap);
      std::vector<double> mb(points);
      for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
        std::fill(mb.begin(), mb.end(), 0.0);
        for (std::size_t k = 0; k < nr; ++k) {
          const auto pick = std::min<std::size_t>(
              nr - 1, static_cast<std::size_t>(brng.uniform(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(k)) *
                                               static_cast<double>(nr)));
          for (std::size_t g = 0; g < points; ++g) mb[g] += diff[pick * points + g];
        }
        double s = 0.0, c = 0.0;
        for (std::size_t g = 0; g < points; ++g) {
          const double v = mb[g] / static_cast<double>(nr);
          s = std::max(s, std::abs(v));
          c = std::max(c, std::abs(v - mean_diff[g]));
        }
        sup[b] = s;
        centered[b] = c;
      }
      const double se = stderr_of(sup) * std::sqrt(static_cast<double>(sup.size()));
      std::sort(centered.begin(), centered.end());
      const auto q = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(centered.size()))) - 1;
      const double floor = centered[std::min(q, centered.size() - 1)];

      double w2 = 0.0;
      for (std::size_t r = 0; r < nr; ++r) w2 += w2sq[l * nr + r];
      w2 = std::sqrt(w2 / static_cast<double>(nr));
      out.gaps.push_back({labels[l], n, gap, se, w2, floor});
    }
    seeds[std::to_string(n)] = nseeds;
  }

  out.info["seeds"] = seeds;
  out.info["safeguard_activations"] = activations;
  json gaps = json::array();
  for (const auto& g : out.gaps)
    gaps.push_back({{"law", g.law}, {"N", g.n}, {"sup_gap", g.sup_gap}, {"gap_stderr", g.gap_stderr},
                    {"w2_surrogate", g.w2_surrogate}, {"noise_floor", g.noise_floor}});
  out.info["gaps"] = gaps;
  return out;
}

RunSummary run_freeze_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunSummary out;
  out.command = "freeze-sweep";
  out.info = base_info(cfg, out.command);
  const auto law = DisorderLaw::from_spec(cfg.freeze_law);
  const auto pot = cfg.make_potential();
  const auto init = cfg.make_initial();
  const std::size_t n = cfg.model.n_particles;
  const std::size_t steps = cfg.model.steps();
  const std::size_t nr = cfg.replicas;
  for (std::size_t k : cfg.kappa_sweep)
    if (steps % k != 0)
      throw ConfigError("kappa " + std::to_string(k) + " does not divide the " + std::to_string(steps) +
                        " grid steps (kappa * substeps)");
  const std::size_t nk = cfg.kappa_sweep.size();
  const double a2 = cfg.a2_value();
  const double c_dd = max_negative_curvature(pot);
  const std::uint64_t master = derive_seed(cfg.model.master_seed, {hash_tag("freeze-brownian"), n});

  std::vector<double> msd(nk * nr, 0.0);
  std::vector<char> violated(nk * nr, 0);
  std::vector<char> in_event(nr, 0);
  std::vector<std::uint64_t> dseeds(nr);
  std::vector<double> norms(nr);
  std::vector<std::size_t> act(nr, 0);

  parallel_for(nr, opts.threads, [&](std::size_t r) {
    dseeds[r] = derive_seed(cfg.model.master_seed, {hash_tag("freeze-disorder"), n, r});
    const auto mat = sample_matrix(law, n, dseeds[r], 1);
    norms[r] = operator_norm(mat, cfg.model.beta, 1e-6).value;
    in_event[r] = norms[r] <= a2;
    for (std::size_t ki = 0; ki < nk; ++ki) {
      ModelParams params = cfg.model;
      params.master_seed = master;
      params.kappa = cfg.kappa_sweep[ki];
      params.substeps = steps / params.kappa;
      const auto run = simulate_coupled(params, pot, mat, init, r);
      msd[ki * nr + r] = run.stats.msd;
      act[r] += run.full.safeguard_activations + run.frozen.safeguard_activations;
      if (!in_event[r]) continue;
      const auto env = coupling_envelope(a2, c_dd, cfg.rho, n, run.full.grid);
      const double cap = 3.0 * cfg.rho * std::sqrt(static_cast<double>(n));
      for (std::size_t g = 0; g < env.size(); ++g) {
        if (run.stats.l_t[g] >= cap) break;
        if (run.stats.r_t[g] > env[g]) {
          violated[ki * nr + r] = 1;
          break;
        }
      }
    }
  });

  const std::size_t events = static_cast<std::size_t>(std::count(in_event.begin(), in_event.end(), char{1}));
  for (std::size_t ki = 0; ki < nk; ++ki) {
    const std::span<const double> col(msd.data() + ki * nr, nr);
    const auto bad = static_cast<std::size_t>(
        std::count(violated.begin() + static_cast<std::ptrdiff_t>(ki * nr),
                   violated.begin() + static_cast<std::ptrdiff_t>((ki + 1) * nr), char{1}));
    out.freeze.push_back({cfg.kappa_sweep[ki], n, mean_of(col), stderr_of(col), bad, events, nr});
  }
  for (std::size_t r = 0; r < nr; ++r)
    out.norms.push_back({law.name(), n, r, dseeds[r], cfg.model.beta, norms[r], in_event[r] != 0});

  // Phi_{N,kappa} across the N sweep at the configured kappa and substeps.
  json phi_seeds = json::object();
  for (std::size_t pn : cfg.n_sweep) {
    const auto params = params_for(cfg, pn, derive_seed(cfg.model.master_seed, {hash_tag("phi-brownian"), pn}));
    std::vector<double> phis(cfg.phi_draws);
    std::vector<std::uint64_t> ps(cfg.phi_draws);
    parallel_for(cfg.phi_draws, opts.threads, [&](std::size_t d) {
      ps[d] = derive_seed(cfg.model.master_seed, {hash_tag("phi-disorder"), pn, d});
      const auto mat = sample_matrix(law, pn, ps[d], 1);
      const auto frozen = simulate_frozen(params, pot, mat, init, d);
      phis[d] = girsanov_stats(frozen, mat, params, pot, cfg.c1).phi;
    });
    out.phi.push_back({pn, params.kappa, cfg.phi_draws, median_of(phis), mean_of(phis)});
    phi_seeds[std::to_string(pn)] = {{"brownian", params.master_seed}, {"disorder", ps}};
  }

  std::size_t total = 0;
  for (auto a : act) total += a;
  out.info["law"] = law.name();
  out.info["a2"] = a2;
  out.info["c_dd"] = c_dd;
  out.info["seeds"] = {{"brownian", master}, {"disorder", dseeds}, {"phi", phi_seeds}};
  out.info["safeguard_activations"] = total;
  json rows = json::array();
  for (const auto& f : out.freeze)
    rows.push_back({{"kappa", f.kappa}, {"msd_mean", f.msd_mean}, {"msd_stderr", f.msd_stderr},
                    {"envelope_violations", f.envelope_violations}, {"replicas_in_event", f.replicas_in_event}});
  out.info["freeze"] = rows;
  json prow = json::array();
  for (const auto& p : out.phi) prow.push_back({{"N", p.n}, {"median", p.median}, {"mean", p.mean}});
  out.info["phi"] = prow;
  return out;
}

RunSummary run_validation(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunSummary out;
  out.command = "validate";
  out.info = base_info(cfg, out.command);
  const auto laws = cfg.make_laws();
  const auto labels = cfg.law_labels();
  const double a2 = cfg.a2_value();

  auto add = [&](const std::string& subject, const std::string& check, Verdict v, double value, double reference,
                 const std::string& detail) {
    out.validation.push_back({subject, check, to_string(v), value, reference, detail});
    if (v == Verdict::Fail) {
      out.ok = false;
      out.failures.push_back(subject + ": " + check + " (" + detail + ")");
    }
  };

  for (std::size_t l = 0; l < laws.size(); ++l) {
    const auto lv = validate_law(laws[l], derive_seed(cfg.model.master_seed, {hash_tag("validate"), l}));
    for (const auto& row : lv.rows) add(labels[l], row.check, row.verdict, row.value, row.reference, row.detail);

    std::vector<std::uint64_t> seeds(cfg.norm_seeds);
    for (std::size_t k = 0; k < seeds.size(); ++k)
      seeds[k] = derive_seed(cfg.model.master_seed, {hash_tag("norm"), l, k});
    const auto diag = condition_diagnostics(laws[l], cfg.norm_n, cfg.gamma, cfg.eps, seeds, opts.threads);

    if (diag.mgf_growth)
      add(labels[l], "mgf_growth", Verdict::Trend, *diag.mgf_growth, cfg.eps, "sup log(mgf)/theta^2 on (0, eps]");
    else
      add(labels[l], "mgf_growth", Verdict::Unavailable, 0.0, cfg.eps, "moment generating function not available");

    for (std::size_t n : cfg.n_sweep) {
      const auto d = condition_diagnostics(laws[l], n, cfg.gamma, cfg.eps);
      if (d.third_moment_sum)
        add(labels[l], "third_moment_sum_N" + std::to_string(n), Verdict::Trend, *d.third_moment_sum, cfg.gamma,
            "N^{-gamma} sum E|J|^3");
      else
        add(labels[l], "third_moment_sum_N" + std::to_string(n), Verdict::Unavailable, 0.0, cfg.gamma,
            "third absolute moment not available");
    }

    if (!diag.scaled_norms.empty()) {
      const auto [lo, hi] = std::minmax_element(diag.scaled_norms.begin(), diag.scaled_norms.end());
      add(labels[l], "scaled_norm", Verdict::Trend, *hi, 2.0,
          "N=" + std::to_string(cfg.norm_n) + " min=" + format_double(*lo) + " max=" + format_double(*hi));
      for (std::size_t k = 0; k < seeds.size(); ++k)
        out.norms.push_back({labels[l], cfg.norm_n, k, seeds[k], 1.0, diag.scaled_norms[k], diag.scaled_norms[k] <= a2});
    }
  }

  const auto pot = cfg.make_potential();
  const std::vector<int> levels = {1, 2, 3, 4, 5, 6};
  const auto conf = confinement_check(pot, levels, cfg.confinement_threshold);
  add(pot.name(), "confinement_upper", conf.upper.strictly_increasing && conf.upper.values.back() > conf.threshold
                                           ? Verdict::Pass : Verdict::Fail,
      conf.upper.values.back(), conf.threshold, conf.note);
  add(pot.name(), "confinement_lower", conf.lower.strictly_increasing && conf.lower.values.back() > conf.threshold
                                           ? Verdict::Pass : Verdict::Fail,
      conf.lower.values.back(), conf.threshold, conf.note);
  add(pot.name(), "max_negative_curvature", Verdict::Trend, max_negative_curvature(pot), 0.0, "sup -U''");

  out.info["pass"] = out.ok;
  return out;
}

RunSummary run_lindeberg_suite(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunSummary out;
  out.command = "lindeberg";
  out.info = base_info(cfg, out.command);
  CertificateOptions co;
  co.instances = cfg.lindeberg_instances;
  co.max_kappa = cfg.lindeberg_max_kappa;
  co.max_n = cfg.lindeberg_max_n;
  co.beta = cfg.model.beta;
  co.horizon = cfg.model.horizon;
  co.s_bound = cfg.model.s_bound;
  co.seed = derive_seed(cfg.model.master_seed, {hash_tag("lindeberg")});
  co.mc_instances = cfg.lindeberg_mc_instances;
  co.mc_samples = cfg.lindeberg_mc_samples;
  auto result = run_certificate(co, opts.threads);

  for (const auto& inst : result.instances) {
    if (!inst.lindeberg_ok) out.failures.push_back("instance seed " + std::to_string(inst.seed) + ": Lindeberg bound");
    if (!inst.det_ok) out.failures.push_back("instance seed " + std::to_string(inst.seed) + ": determinant bound");
    if (!inst.mc_ok) out.failures.push_back("instance seed " + std::to_string(inst.seed) + ": Monte Carlo mismatch");
  }
  out.ok = result.pass();
  out.info["suite_seed"] = co.seed;
  out.info["instances"] = result.instances.size();
  out.info["lindeberg_pass"] = result.lindeberg_pass;
  out.info["det_pass"] = result.det_pass;
  out.info["mc_checked"] = result.mc_checked;
  out.info["mc_pass"] = result.mc_pass;
  out.info["worst_slack_ratio"] = result.worst_slack_ratio;
  out.info["pass"] = out.ok;
  out.lindeberg = std::move(result);
  return out;
}

std::vector<std::pair<double, double>> replay_trajectory(const ExperimentConfig& cfg, const ReplayRequest& req) {
  const auto labels = cfg.law_labels();
  const auto it = std::find(labels.begin(), labels.end(), req.law);
  if (it == labels.end()) throw ConfigError("replay: law '" + req.law + "' is not in the config");
  if (req.n == 0) throw ConfigError("replay: N must be >= 1");
  if (req.particle >= req.n) throw ConfigError("replay: particle index out of range");
  const auto l = static_cast<std::size_t>(it - labels.begin());
  const auto law = DisorderLaw::from_spec(cfg.laws[l]);
  const auto params = params_for(cfg, req.n, universality_brownian_seed(cfg, req.n));
  const auto mat = sample_matrix(law, req.n, universality_disorder_seed(cfg, l, req.n, req.replica));
  const auto ens = simulate_full(params, cfg.make_potential(), mat, cfg.make_initial(), req.replica);
  std::vector<std::pair<double, double>> out;
  for (std::size_t g = 0; g < ens.points(); ++g) out.emplace_back(ens.grid[g], ens.at(req.particle, g));
  return out;
}

// ---------------------------------------------------------------------------
// persistence

void write_outputs(const RunSummary& summary, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                   double wall_seconds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());

  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");

  json s = summary.info;
  s["command"] = summary.command;
  s["ok"] = summary.ok;
  s["failures"] = summary.failures;
  s["wall_seconds"] = wall_seconds;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  s["timestamp"] = stamp;
  write_text(dir / "summary.json", s.dump(2) + "\n");

  const auto f = [](double v) { return format_double(v); };

  if (!summary.autocorr.empty()) {
    std::string t = "law,N,replica_count,t,mean,stderr\n";
    for (const auto& r : summary.autocorr)
      t += r.law + "," + std::to_string(r.n) + "," + std::to_string(r.replica_count) + "," + f(r.t) + "," + f(r.mean) +
           "," + f(r.stderr_) + "\n";
    write_text(dir / "autocorr.csv", t);
  }
  if (!summary.gaps.empty()) {
    std::string t = "law,N,sup_gap,w2_surrogate,noise_floor\n";
    for (const auto& r : summary.gaps)
      t += r.law + "," + std::to_string(r.n) + "," + f(r.sup_gap) + "," + f(r.w2_surrogate) + "," + f(r.noise_floor) +
           "\n";
    write_text(dir / "gaps.csv", t);
  }
  if (!summary.freeze.empty()) {
    std::string t = "kappa,N,msd_mean,msd_stderr,envelope_violations\n";
    for (const auto& r : summary.freeze)
      t += std::to_string(r.kappa) + "," + std::to_string(r.n) + "," + f(r.msd_mean) + "," + f(r.msd_stderr) + "," +
           std::to_string(r.envelope_violations) + "\n";
    write_text(dir / "freeze.csv", t);
  }
  if (!summary.phi.empty()) {
    std::string t = "N,kappa,draws,phi_median,phi_mean\n";
    for (const auto& r : summary.phi)
      t += std::to_string(r.n) + "," + std::to_string(r.kappa) + "," + std::to_string(r.draws) + "," + f(r.median) +
           "," + f(r.mean) + "\n";
    write_text(dir / "phi.csv", t);
  }
  if (!summary.norms.empty()) {
    std::string t = "law,N,index,seed,beta,norm,in_event\n";
    for (const auto& r : summary.norms)
      t += r.law + "," + std::to_string(r.n) + "," + std::to_string(r.index) + "," + std::to_string(r.seed) + "," +
           f(r.beta) + "," + f(r.norm) + "," + (r.in_event ? "1" : "0") + "\n";
    write_text(dir / "norms.csv", t);
  }
  if (!summary.validation.empty()) {
    std::string t = "subject,check,verdict,value,reference,detail\n";
    for (const auto& r : summary.validation) {
      std::string detail = r.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      t += r.subject + "," + r.check + "," + r.verdict + "," + f(r.value) + "," + f(r.reference) + "," + detail + "\n";
    }
    write_text(dir / "validation.csv", t);
  }
  if (summary.lindeberg) {
    std::string t =
        "index,seed,kappa,N,exact_discrete,gaussian_exact,lhs,bound,slack_ratio,det_lower,sylvester_gap,"
        "lindeberg_ok,det_ok,mc_estimate,mc_stderr,mc_ok\n";
    for (const auto& r : summary.lindeberg->instances) {
      t += std::to_string(r.index) + "," + std::to_string(r.seed) + "," + std::to_string(r.kappa) + "," +
           std::to_string(r.n) + "," + f(r.exact_discrete) + "," + f(r.gaussian_exact) + "," + f(r.lhs) + "," +
           f(r.bound) + "," + f(r.slack_ratio) + "," + f(r.det_lower) + "," + f(r.sylvester_gap) + "," +
           (r.lindeberg_ok ? "1" : "0") + "," + (r.det_ok ? "1" : "0") + "," +
           (r.mc ? f(r.mc->estimate) : std::string()) + "," + (r.mc ? f(r.mc->std_error) : std::string()) + "," +
           (r.mc_ok ? "1" : "0") + "\n";
    }
    write_text(dir / "lindeberg.csv", t);
  }
  if (!summary.paths_csv.empty()) write_text(dir / "paths.csv", "law,N,replica,particle,t,value\n" + summary.paths_csv);
}

}  // namespace spinlab
