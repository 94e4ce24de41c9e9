#include "spinlab/lindeberg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "spinlab/errors.hpp"
#include "spinlab/parallel.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

QuadraticForm::QuadraticForm(std::size_t rows, std::size_t cols, std::vector<double> x, std::vector<double> b)
    : rows_(rows), cols_(cols), x_(std::move(x)), b_(std::move(b)) {
  if (rows_ < 1 || cols_ < 1) throw DomainError("quadratic form needs kappa, N >= 1");
  if (x_.size() != rows_ * cols_) throw DomainError("quadratic form: X must have kappa*N entries");
  if (b_.size() != rows_) throw DomainError("quadratic form: b must have kappa entries");
  for (double v : x_)
    if (!std::isfinite(v)) throw DomainError("quadratic form: non-finite entry in X");
  for (double v : b_)
    if (!std::isfinite(v)) throw DomainError("quadratic form: non-finite entry in b");
}

double QuadraticForm::column_norm2(std::size_t j) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < rows_; ++k) acc += x(k, j) * x(k, j);
  return acc;
}

double h_eval(const QuadraticForm& q, std::span<const double> z) {
  if (z.size() != q.cols()) throw DomainError("h_eval: z has the wrong length");
  double acc = 0.0;
  for (std::size_t k = 0; k < q.rows(); ++k) {
    double r = -q.b()[k];
    for (std::size_t j = 0; j < q.cols(); ++j) r += q.x(k, j) * z[j];
    acc += r * r;
  }
  return 0.5 * acc;
}

double lindeberg_constant() {
  return 0.5 * std::exp(-std::sqrt(3.0) / 2.0) * (std::pow(3.0, 0.25) + std::pow(3.0, -0.25));
}

double lindeberg_bound(const QuadraticForm& q, const DisorderLaw& law) {
  const auto third = law.abs_third_moment();
  if (!third.has_value()) throw DomainError("lindeberg_bound: law '" + law.name() + "' has no third absolute moment");
  const double moments = *third + gaussian_abs_third_moment();
  double acc = 0.0;
  for (std::size_t j = 0; j < q.cols(); ++j) acc += std::pow(q.column_norm2(j), 1.5);
  return lindeberg_constant() * acc * moments;
}

namespace {

// In-place Cholesky of a symmetric positive definite row-major matrix.
void cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) throw NumericalError("Cholesky factorisation failed: matrix not positive definite");
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
}

double log_det_from_cholesky(const std::vector<double>& l, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += std::log(l[j * n + j]);
  return 2.0 * acc;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n, std::span<const double> rhs) {
  std::vector<double> y(rhs.begin(), rhs.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= l[i * n + k] * y[k];
    y[i] /= l[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= l[k * n + i] * y[k];
    y[i] /= l[i * n + i];
  }
  return y;
}

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

GaussianExpectation gaussian_expectation_exact(const QuadraticForm& q) {
  const std::size_t kappa = q.rows();
  std::vector<double> s(kappa * kappa, 0.0);
  for (std::size_t a = 0; a < kappa; ++a) {
    for (std::size_t c = 0; c <= a; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < q.cols(); ++j) acc += q.x(a, j) * q.x(c, j);
      s[a * kappa + c] = acc;
      s[c * kappa + a] = acc;
    }
    s[a * kappa + a] += 1.0;
  }
  cholesky(s, kappa);
  GaussianExpectation out;
  out.log_det = log_det_from_cholesky(s, kappa);
  const auto y = cholesky_solve(s, kappa, q.b());
  double quad = 0.0, b2 = 0.0;
  for (std::size_t k = 0; k < kappa; ++k) {
    quad += q.b()[k] * y[k];
    b2 += q.b()[k] * q.b()[k];
  }
  out.value = std::exp(-0.5 * out.log_det - 0.5 * quad);
  out.lower_bound = std::exp(-0.5 * b2 - 0.5 * out.log_det);
  return out;
}

double log_det_gram_columns(const QuadraticForm& q) {
  const std::size_t n = q.cols();
  std::vector<double> s(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = 0; c <= a; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < q.rows(); ++k) acc += q.x(k, a) * q.x(k, c);
      s[a * n + c] = acc;
      s[c * n + a] = acc;
    }
    s[a * n + a] += 1.0;
  }
  cholesky(s, n);
  return log_det_from_cholesky(s, n);
}

double expectation_exact_discrete(const QuadraticForm& q, const DisorderLaw& law) {
  if (law.kind() != DisorderLaw::Kind::Rademacher)
    throw DomainError("expectation_exact_discrete: only the Rademacher law can be enumerated");
  const std::size_t n = q.cols();
  if (n > 20) throw DomainError("expectation_exact_discrete: N too large for enumeration (max 20)");
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<double> z(n);
  CompensatedSum total;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t j = 0; j < n; ++j) z[j] = ((mask >> j) & 1u) ? 1.0 : -1.0;
    total.add(std::exp(-h_eval(q, z)));
  }
  return total.value() / static_cast<double>(count);
}

McEstimate expectation_mc(const QuadraticForm& q, const DisorderLaw& law, std::size_t samples, std::uint64_t seed,
                          std::size_t threads) {
  if (samples < 1000) throw DomainError("expectation_mc: at least 1000 samples required");
  const CounterRng rng(seed);
  constexpr std::size_t kBlock = 65536;
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  struct Partial {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Partial> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t blk) {
    std::vector<double> z(q.cols());
    Partial p;
    const std::size_t end = std::min(samples, (blk + 1) * kBlock);
    for (std::size_t s = blk * kBlock; s < end; ++s) {
      for (std::size_t j = 0; j < q.cols(); ++j)
        z[j] = law.sample(DrawSource(rng, static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(j)));
      const double v = std::exp(-h_eval(q, z));
      p.count += 1.0;
      const double d = v - p.mean;
      p.mean += d / p.count;
      p.m2 += d * (v - p.mean);
    }
    partial[blk] = p;
  });
  // Fixed-order merge of block statistics.
  Partial acc = partial.front();
  for (std::size_t blk = 1; blk < blocks; ++blk) {
    const Partial& p = partial[blk];
    const double total = acc.count + p.count;
    const double d = p.mean - acc.mean;
    acc.mean += d * p.count / total;
    acc.m2 += p.m2 + d * d * acc.count * p.count / total;
    acc.count = total;
  }
  McEstimate out;
  out.estimate = acc.mean;
  out.std_error = std::sqrt(std::max(0.0, acc.m2 / (acc.count - 1.0)) / acc.count);
  return out;
}

QuadraticForm certificate_instance(const CertificateOptions& opts, std::size_t index) {
  const CounterRng rng(derive_seed(opts.seed, {hash_tag("lindeberg-instance"), index}));
  std::uint32_t counter = 0;
  auto uniform = [&] { return rng.uniform(counter++, 0); };
  const std::size_t kappa = 1 + std::min(opts.max_kappa - 1, static_cast<std::size_t>(uniform() * opts.max_kappa));
  const std::size_t n = 1 + std::min(opts.max_n - 1, static_cast<std::size_t>(uniform() * opts.max_n));
  const double scale = opts.beta * std::sqrt(opts.horizon) / std::sqrt(static_cast<double>(n * kappa));
  std::vector<double> x(kappa * n), b(kappa);
  for (double& v : x) v = scale * opts.s_bound * (2.0 * uniform() - 1.0);
  for (double& v : b) v = rng.normal(counter++, 1);
  return QuadraticForm(kappa, n, std::move(x), std::move(b));
}

CertificateResult run_certificate(const CertificateOptions& opts, std::size_t threads) {
  if (opts.max_kappa < 1 || opts.max_n < 1 || opts.max_n > 20) throw DomainError("certificate: need 1 <= N <= 20, kappa >= 1");
  CertificateResult result;
  result.instances.resize(opts.instances);
  const DisorderLaw rademacher = DisorderLaw::rademacher();
  const DisorderLaw gaussian = DisorderLaw::gaussian();
  parallel_for(opts.instances, threads, [&](std::size_t r) {
    const QuadraticForm q = certificate_instance(opts, r);
    CertificateInstance& inst = result.instances[r];
    inst.index = r;
    inst.seed = derive_seed(opts.seed, {hash_tag("lindeberg-instance"), r});
    inst.kappa = q.rows();
    inst.n = q.cols();
    inst.exact_discrete = expectation_exact_discrete(q, rademacher);
    const GaussianExpectation g = gaussian_expectation_exact(q);
    inst.gaussian_exact = g.value;
    inst.det_lower = g.lower_bound;
    inst.lhs = std::abs(inst.exact_discrete - inst.gaussian_exact);
    inst.bound = lindeberg_bound(q, rademacher);
    inst.slack_ratio = inst.bound > 0.0 ? inst.lhs / inst.bound : (inst.lhs > 0.0 ? INFINITY : 0.0);
    inst.lindeberg_ok = inst.lhs <= inst.bound + opts.tolerance;
    inst.det_ok = inst.gaussian_exact >= inst.det_lower - opts.tolerance;
    inst.sylvester_gap = std::abs(g.log_det - log_det_gram_columns(q));
    if (inst.sylvester_gap > 1e-9 * (1.0 + std::abs(g.log_det)))
      throw NumericalError("certificate instance " + std::to_string(r) + ": kappa x kappa and N x N determinants disagree");
    if (r < opts.mc_instances) {
      inst.mc = expectation_mc(q, gaussian, opts.mc_samples, derive_seed(inst.seed, {hash_tag("mc")}));
      inst.mc_ok = std::abs(inst.mc->estimate - inst.gaussian_exact) <= 4.0 * inst.mc->std_error;
    }
  });
  for (const auto& inst : result.instances) {
    result.lindeberg_pass += inst.lindeberg_ok;
    result.det_pass += inst.det_ok;
    if (inst.mc) {
      ++result.mc_checked;
      result.mc_pass += inst.mc_ok;
    }
    result.worst_slack_ratio = std::max(result.worst_slack_ratio, inst.slack_ratio);
  }
  return result;
}

}  // namespace spinlab
