#include "spinlab/disorder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "spinlab/parallel.hpp"

namespace spinlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailProbe = 0.5;  // eps at which E e^{eps|J|} is reported

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Builds a custom law from a description file; see README for the format.
DisorderLaw load_custom_law(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open custom law description '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("custom law '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("custom law '" + path + "' must be a JSON object");
  static const std::vector<std::string> allowed = {"name", "family", "scale", "values", "probs", "declare_moments"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("custom law '" + path + "': unknown key '" + key + "'");
  }
  const std::string family = doc.value("family", std::string{});
  const std::string name = doc.value("name", "custom:" + family);
  const bool declare = doc.value("declare_moments", true);

  if (family == "uniform") {
    // Symmetric uniform on (-sqrt3, sqrt3): zero mean, unit variance.
    const double a = std::sqrt(3.0);
    DeclaredMoments m;
    if (declare) {
      m.mean = 0.0;
      m.variance = 1.0;
      m.abs_third = a * a * a / 4.0;
      m.mgf_max = [a](double t) { return t == 0.0 ? 1.0 : std::sinh(a * t) / (a * t); };
      m.exp_abs_moment = [a](double e) { return e == 0.0 ? 1.0 : std::expm1(a * e) / (a * e); };
    }
    return DisorderLaw::custom(name, [a](const DrawSource& src) { return a * (2.0 * src.uniform() - 1.0); }, m);
  }
  if (family == "cauchy") {
    const double scale = doc.value("scale", 1.0);
    if (!(scale > 0.0)) throw ConfigError("custom law '" + path + "': cauchy scale must be > 0");
    return DisorderLaw::custom(
        name, [scale](const DrawSource& src) { return scale * std::tan(std::numbers::pi * (src.uniform() - 0.5)); });
  }
  if (family == "discrete") {
    const auto values = doc.at("values").get<std::vector<double>>();
    const auto probs = doc.at("probs").get<std::vector<double>>();
    if (values.empty() || values.size() != probs.size())
      throw ConfigError("custom law '" + path + "': values and probs must be nonempty and of equal length");
    std::vector<double> cumulative(probs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (!(probs[k] >= 0.0)) throw ConfigError("custom law '" + path + "': negative probability");
      total += probs[k];
      cumulative[k] = total;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("custom law '" + path + "': probabilities must sum to 1");
    DeclaredMoments m;
    if (declare) {
      double mean = 0.0, second = 0.0, third = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) {
        mean += probs[k] * values[k];
        second += probs[k] * values[k] * values[k];
        third += probs[k] * std::pow(std::abs(values[k]), 3.0);
      }
      m.mean = mean;
      m.variance = second - mean * mean;
      m.abs_third = third;
      m.mgf_max = [values, probs](double t) {
        double plus = 0.0, minus = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
          plus += probs[k] * std::exp(t * values[k]);
          minus += probs[k] * std::exp(-t * values[k]);
        }
        return std::max(plus, minus);
      };
      m.exp_abs_moment = [values, probs](double e) {
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) acc += probs[k] * std::exp(e * std::abs(values[k]));
        return acc;
      };
    }
    return DisorderLaw::custom(
        name,
        [values, cumulative](const DrawSource& src) {
          const double u = src.uniform();
          const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
          const std::size_t k = std::min<std::size_t>(it - cumulative.begin(), values.size() - 1);
          return values[k];
        },
        m);
  }
  throw ConfigError("custom law '" + path + "': unknown family '" + family + "' (uniform, cauchy, discrete)");
}

}  // namespace

double gaussian_abs_third_moment() { return std::sqrt(8.0 / std::numbers::pi); }

DisorderLaw DisorderLaw::gaussian() { return DisorderLaw(Kind::StandardGaussian, "gaussian"); }
DisorderLaw DisorderLaw::rademacher() { return DisorderLaw(Kind::Rademacher, "rademacher"); }
DisorderLaw DisorderLaw::centered_exponential() { return DisorderLaw(Kind::CenteredExponential, "cexp"); }

DisorderLaw DisorderLaw::custom(std::string name, Sampler sampler, DeclaredMoments moments) {
  if (!sampler) throw DomainError("custom law needs a sampler");
  DisorderLaw law(Kind::Custom, std::move(name));
  law.sampler_ = std::move(sampler);
  law.declared_ = std::move(moments);
  return law;
}

DisorderLaw DisorderLaw::from_spec(const std::string& spec) {
  if (spec == "gaussian") return gaussian();
  if (spec == "rademacher") return rademacher();
  if (spec == "cexp") return centered_exponential();
  if (spec.rfind("custom:", 0) == 0) {
    try {
      return load_custom_law(spec.substr(7));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("custom law '" + spec.substr(7) + "': " + e.what());
    }
  }
  throw ConfigError("unknown disorder law '" + spec + "' (gaussian, rademacher, cexp, custom:<path>)");
}

double DisorderLaw::sample(const DrawSource& src) const {
  switch (kind_) {
    case Kind::StandardGaussian:
      return src.normal();
    case Kind::Rademacher:
      return (src.bits() & 1u) ? 1.0 : -1.0;
    case Kind::CenteredExponential:
      return -std::log(src.uniform()) - 1.0;
    case Kind::Custom:
      return sampler_(src);
  }
  return 0.0;
}

std::optional<double> DisorderLaw::mean() const {
  if (is_builtin()) return 0.0;
  return declared_.mean;
}

std::optional<double> DisorderLaw::variance() const {
  if (is_builtin()) return 1.0;
  return declared_.variance;
}

std::optional<double> DisorderLaw::abs_third_moment() const {
  switch (kind_) {
    case Kind::StandardGaussian:
      return gaussian_abs_third_moment();
    case Kind::Rademacher:
      return 1.0;
    case Kind::CenteredExponential:
      // int_0^inf |x-1|^3 e^{-x} dx = (6/e - 2) + 6/e
      return 12.0 / std::numbers::e - 2.0;
    case Kind::Custom:
      return declared_.abs_third;
  }
  return std::nullopt;
}

std::optional<double> DisorderLaw::mgf_max(double theta) const {
  switch (kind_) {
    case Kind::StandardGaussian:
      return std::exp(0.5 * theta * theta);
    case Kind::Rademacher:
      return std::cosh(theta);
    case Kind::CenteredExponential: {
      const double t = std::abs(theta);
      if (t >= 1.0) return kInf;
      return std::max(std::exp(-t) / (1.0 - t), std::exp(t) / (1.0 + t));
    }
    case Kind::Custom:
      if (!declared_.mgf_max) return std::nullopt;
      return declared_.mgf_max(theta);
  }
  return std::nullopt;
}

std::optional<double> DisorderLaw::exp_abs_moment(double eps) const {
  switch (kind_) {
    case Kind::StandardGaussian:
      return 2.0 * std::exp(0.5 * eps * eps) * standard_normal_cdf(eps);
    case Kind::Rademacher:
      return std::exp(eps);
    case Kind::CenteredExponential:
      if (eps >= 1.0) return kInf;
      return std::exp(eps) * (1.0 - std::exp(-(1.0 + eps))) / (1.0 + eps) + std::exp(-1.0) / (1.0 - eps);
    case Kind::Custom:
      if (!declared_.exp_abs_moment) return std::nullopt;
      return declared_.exp_abs_moment(eps);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Matrices

DisorderMatrix::DisorderMatrix(DisorderLaw law, std::size_t n, std::uint64_t seed, std::vector<double> entries)
    : law_(std::move(law)), n_(n), seed_(seed), entries_(std::move(entries)) {
  if (n_ < 1) throw DomainError("disorder matrix size must be >= 1");
  if (entries_.size() != n_ * n_) throw DomainError("disorder matrix entries must have N*N elements");
}

void DisorderMatrix::apply_scaled(double beta, std::span<const double> x, std::span<double> out) const {
  const double scale = beta / std::sqrt(static_cast<double>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const double* r = entries_.data() + i * n_;
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) acc += r[j] * x[j];
    out[i] = scale * acc;
  }
}

void DisorderMatrix::apply_scaled_transpose(double beta, std::span<const double> x, std::span<double> out) const {
  const double scale = beta / std::sqrt(static_cast<double>(n_));
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* r = entries_.data() + i * n_;
    const double xi = x[i];
    for (std::size_t j = 0; j < n_; ++j) out[j] += r[j] * xi;
  }
  for (double& v : out) v *= scale;
}

DisorderMatrix sample_matrix(const DisorderLaw& law, std::size_t n, std::uint64_t seed, std::size_t threads) {
  if (n < 1) throw DomainError("sample_matrix: n must be >= 1");
  const CounterRng rng(seed);
  std::vector<double> entries(n * n);
  constexpr std::size_t kRowBlock = 16;
  const std::size_t blocks = (n + kRowBlock - 1) / kRowBlock;
  parallel_for(blocks, threads, [&](std::size_t block) {
    const std::size_t end = std::min(n, (block + 1) * kRowBlock);
    for (std::size_t i = block * kRowBlock; i < end; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        entries[i * n + j] = law.sample(DrawSource(rng, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)));
      }
    }
  });
  return DisorderMatrix(law, n, seed, std::move(entries));
}

// ---------------------------------------------------------------------------
// Operator norm

namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

NormEstimate operator_norm(const DisorderMatrix& mat, double beta, double tol, std::size_t max_iterations) {
  if (!(tol > 0.0)) throw DomainError("operator_norm: tol must be > 0");
  const std::size_t n = mat.size();
  const double scale = std::abs(beta) / std::sqrt(static_cast<double>(n));
  NormEstimate est;
  const auto all = mat.entries();
  if (scale == 0.0 || std::all_of(all.begin(), all.end(), [](double v) { return v == 0.0; })) return est;

  // Work with M = J^T J; the beta/sqrt(N) factor is applied at the end.
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> w(n), u(n);
  auto apply_gram = [&] {
    mat.apply_scaled(std::sqrt(static_cast<double>(n)), v, w);
    mat.apply_scaled_transpose(std::sqrt(static_cast<double>(n)), w, u);
    double lambda = 0.0;
    for (double x : w) lambda += x * x;
    return lambda;
  };

  double lambda = apply_gram();
  if (lambda == 0.0) {
    // Start vector in the null space; one deterministic restart.
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    est.restarted = true;
    lambda = apply_gram();
  }
  auto finish = [&](std::size_t iterations) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) r2 += (u[j] - lambda * v[j]) * (u[j] - lambda * v[j]);
    est.value = scale * std::sqrt(lambda);
    est.residual = scale * scale * std::sqrt(r2);
    est.upper_estimate = scale * std::sqrt(lambda + std::sqrt(r2));
    est.iterations = iterations;
    return est;
  };
  if (lambda == 0.0) {
    finish(0);
    throw NormConvergenceError("operator_norm: power iteration stalled at zero after restart", est);
  }

  double previous_delta = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    const double un = norm2(u);
    for (std::size_t j = 0; j < n; ++j) v[j] = u[j] / un;
    const double next = apply_gram();
    const double delta = next - lambda;
    lambda = next;
    if (delta <= 0.0) return finish(it);
    // Geometric extrapolation of the remaining increase.
    double remaining = delta;
    if (it > 1 && previous_delta > 0.0) {
      const double ratio = delta / previous_delta;
      if (ratio < 1.0) remaining = delta * ratio / (1.0 - ratio);
    }
    previous_delta = delta;
    if (it > 1 && delta + remaining <= 0.5 * tol * lambda) return finish(it);
  }
  finish(max_iterations);
  throw NormConvergenceError("operator_norm: no convergence within the iteration cap", est);
}

// ---------------------------------------------------------------------------
// Validation

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "PASS";
    case Verdict::Fail:
      return "FAIL";
    case Verdict::Trend:
      return "TREND";
    case Verdict::Unavailable:
      return "UNAVAILABLE";
  }
  return "?";
}

namespace {

struct BatchMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double fourth_central = 0.0;
  double abs_third = 0.0;
  double tail_mean = 0.0;  // mean of e^{eps|J|}
  double tail_sd = 0.0;
};

BatchMoments moments_of(std::span<const double> xs) {
  BatchMoments m;
  m.count = xs.size();
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double tail2 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m.variance += d * d;
    m.fourth_central += d * d * d * d;
    m.abs_third += std::abs(x * x * x);
    const double e = std::exp(kTailProbe * std::abs(x));
    m.tail_mean += e;
    tail2 += e * e;
  }
  m.variance /= n - 1.0;
  m.fourth_central /= n;
  m.abs_third /= n;
  m.tail_mean /= n;
  m.tail_sd = std::sqrt(std::max(0.0, tail2 / n - m.tail_mean * m.tail_mean));
  return m;
}

std::string describe(double a, double b) {
  std::ostringstream out;
  out.precision(8);
  out << a << " vs " << b;
  return out.str();
}

}  // namespace

LawValidation validate_law(const DisorderLaw& law, std::uint64_t seed, std::size_t draws) {
  LawValidation report;
  report.law = law.name();

  if (law.is_builtin()) {
    report.rows.push_back({"zero_mean", Verdict::Pass, 0.0, 0.0, "analytic"});
    report.rows.push_back({"unit_variance", Verdict::Pass, 1.0, 1.0, "analytic"});
    const double tail = *law.exp_abs_moment(kTailProbe);
    report.rows.push_back({"exponential_tail", std::isfinite(tail) ? Verdict::Pass : Verdict::Fail, tail, kTailProbe,
                           "analytic E exp(eps|J|) at eps=0.5"});
    report.rows.push_back({"abs_third_moment", Verdict::Pass, *law.abs_third_moment(), 0.0, "analytic"});
    report.pass = true;
    return report;
  }

  if (draws < 1000) throw DomainError("validate_law: at least 1000 draws required");
  const CounterRng rng(seed);
  std::vector<double> xs(draws);
  for (std::size_t k = 0; k < draws; ++k)
    xs[k] = law.sample(DrawSource(rng, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)));
  // Nested prefixes: draws/100, draws/10, draws.
  const std::vector<std::size_t> sizes = {draws / 100, draws / 10, draws};
  std::vector<BatchMoments> batches;
  for (std::size_t s : sizes) batches.push_back(moments_of(std::span<const double>(xs.data(), s)));
  const BatchMoments& full = batches.back();
  const double nd = static_cast<double>(draws);
  const double mean_se = std::sqrt(full.variance / nd);
  const double var_se = std::sqrt(std::max(0.0, full.fourth_central - full.variance * full.variance) / nd);

  const auto declared_mean = law.mean();
  const auto declared_var = law.variance();
  const bool declared = declared_mean.has_value() && declared_var.has_value();
  report.empirical_only = !declared;

  if (declared) {
    ValidationRow mean_row{"zero_mean", std::abs(*declared_mean) <= 1e-12 ? Verdict::Pass : Verdict::Fail,
                           *declared_mean, 0.0, "declared"};
    if (std::abs(full.mean - *declared_mean) > 5.0 * std::sqrt(*declared_var / nd)) {
      mean_row.verdict = Verdict::Fail;
      mean_row.detail = "declared mean inconsistent with draws: " + describe(*declared_mean, full.mean);
    }
    report.rows.push_back(mean_row);
    ValidationRow var_row{"unit_variance", std::abs(*declared_var - 1.0) <= 1e-12 ? Verdict::Pass : Verdict::Fail,
                          *declared_var, 1.0, "declared"};
    if (!std::isfinite(full.variance) || std::abs(full.variance - *declared_var) > 5.0 * var_se) {
      var_row.verdict = Verdict::Fail;
      var_row.detail = "declared variance inconsistent with draws: " + describe(*declared_var, full.variance);
    }
    report.rows.push_back(var_row);
  } else {
    const bool mean_ok = std::isfinite(full.mean) && std::abs(full.mean) <= 5.0 * mean_se;
    report.rows.push_back({"zero_mean", mean_ok ? Verdict::Pass : Verdict::Fail, full.mean, 0.0,
                           "empirical only, " + std::to_string(draws) + " draws"});
    bool var_ok = std::isfinite(full.variance) && std::abs(full.variance - 1.0) <= 5.0 * var_se;
    // A finite variance gives smaller-batch estimates that agree with the
    // full batch within their own errors, and no single draw dominates.
    for (std::size_t b = 0; b + 1 < batches.size(); ++b) {
      const auto& batch = batches[b];
      const double se = std::sqrt(std::max(0.0, batch.fourth_central - batch.variance * batch.variance) /
                                  static_cast<double>(batch.count));
      if (!std::isfinite(batch.variance) || std::abs(batch.variance - full.variance) > 5.0 * se + 1e-12)
        var_ok = false;
    }
    double max_square = 0.0, sum_square = 0.0;
    for (double x : xs) {
      max_square = std::max(max_square, x * x);
      sum_square += x * x;
    }
    const double max_share = max_square / sum_square;
    if (!(max_share <= 0.01)) var_ok = false;
    std::ostringstream detail;
    detail << "empirical only; batch variances";
    for (const auto& b : batches) detail << ' ' << b.variance;
    detail << "; largest single-draw share " << max_share;
    report.rows.push_back({"unit_variance", var_ok ? Verdict::Pass : Verdict::Fail, full.variance, 1.0, detail.str()});
  }

  if (const auto tail = law.exp_abs_moment(kTailProbe); tail.has_value()) {
    report.rows.push_back({"exponential_tail", std::isfinite(*tail) ? Verdict::Pass : Verdict::Fail, *tail,
                           kTailProbe, "declared E exp(eps|J|) at eps=0.5"});
  } else {
    bool stable = std::isfinite(full.tail_mean);
    for (const auto& b : batches) {
      const double se = b.tail_sd / std::sqrt(static_cast<double>(b.count));
      if (!std::isfinite(b.tail_mean) || std::abs(b.tail_mean - full.tail_mean) > 5.0 * se + 1e-12) stable = false;
    }
    report.rows.push_back({"exponential_tail", stable ? Verdict::Pass : Verdict::Fail, full.tail_mean, kTailProbe,
                           "empirical only, batch stability of E exp(eps|J|)"});
  }

  if (const auto third = law.abs_third_moment(); third.has_value()) {
    report.rows.push_back({"abs_third_moment", Verdict::Pass, *third, full.abs_third, "declared"});
  } else {
    report.rows.push_back({"abs_third_moment", Verdict::Trend, full.abs_third, 0.0, "empirical only"});
  }

  report.pass = std::none_of(report.rows.begin(), report.rows.end(),
                             [](const ValidationRow& r) { return r.verdict == Verdict::Fail; });
  return report;
}

ConditionDiagnostics condition_diagnostics(const DisorderLaw& law, std::size_t n, double gamma, double eps,
                                           std::span<const std::uint64_t> norm_seeds, std::size_t threads) {
  if (n < 1) throw DomainError("condition_diagnostics: n must be >= 1");
  if (!(gamma > 1.0 && gamma < 2.5)) throw DomainError("condition_diagnostics: gamma must lie in (1, 5/2)");
  if (!(eps > 0.0)) throw DomainError("condition_diagnostics: eps must be > 0");

  ConditionDiagnostics out;
  if (law.mgf_max(eps).has_value()) {
    double sup = -kInf;
    constexpr int kGrid = 64;
    for (int k = 1; k <= kGrid; ++k) {
      const double theta = eps * k / kGrid;
      double log_mgf = 0.0;
      // Closed forms avoid exp/log round-off where available.
      switch (law.kind()) {
        case DisorderLaw::Kind::StandardGaussian:
          log_mgf = theta * theta / 2.0;
          break;
        case DisorderLaw::Kind::Rademacher:
          log_mgf = std::log(std::cosh(theta));
          break;
        default:
          log_mgf = std::log(*law.mgf_max(theta));
      }
      sup = std::max(sup, log_mgf / (theta * theta));
    }
    out.mgf_growth = sup;
  }
  if (const auto third = law.abs_third_moment(); third.has_value()) {
    out.third_moment_sum = std::pow(static_cast<double>(n), 2.0 - gamma) * *third;
  }
  out.scaled_norms.resize(norm_seeds.size());
  parallel_for(norm_seeds.size(), threads, [&](std::size_t k) {
    const DisorderMatrix mat = sample_matrix(law, n, norm_seeds[k]);
    out.scaled_norms[k] = operator_norm(mat, 1.0, 1e-8).value;
  });
  return out;
}

}  // namespace spinlab
