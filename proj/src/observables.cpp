#include "spinlab/observables.hpp"

#include <algorithm>
#include <cmath>

#include "spinlab/errors.hpp"

namespace spinlab {

namespace {

void check_same_grid(const std::vector<double>& a, const std::vector<double>& b) {
  if (a != b) throw DomainError("ensembles are not on the same time grid");
}

}  // namespace

double d2_path(std::span<const double> x, std::span<const double> y, double horizon) {
  if (x.size() != y.size()) throw DomainError("d2_path: paths have different grid sizes");
  if (x.size() < 2) throw DomainError("d2_path: need at least two grid points");
  if (!(horizon > 0.0)) throw DomainError("d2_path: horizon must be > 0");
  const double h = horizon / static_cast<double>(x.size() - 1);
  double acc = 0.0;
  for (std::size_t g = 0; g + 1 < x.size(); ++g) {
    const double d0 = x[g] - y[g];
    const double d1 = x[g + 1] - y[g + 1];
    acc += 0.5 * (d0 * d0 + d1 * d1) * h;
  }
  return std::sqrt(acc / horizon);
}

double coupling_msd(const PathEnsemble& xs, const PathEnsemble& ys) {
  if (xs.particles() != ys.particles()) throw DomainError("coupling_msd: ensembles have different N");
  check_same_grid(xs.grid, ys.grid);
  const std::size_t points = xs.points();
  std::vector<double> sq(points, 0.0);
  for (std::size_t i = 0; i < xs.particles(); ++i) {
    for (std::size_t g = 0; g < points; ++g) {
      const double d = xs.at(i, g) - ys.at(i, g);
      sq[g] += d * d;
    }
  }
  double integral = 0.0;
  for (std::size_t g = 0; g + 1 < points; ++g) integral += 0.5 * (sq[g] + sq[g + 1]) * (xs.grid[g + 1] - xs.grid[g]);
  const double horizon = xs.grid.back() - xs.grid.front();
  return integral / (static_cast<double>(xs.particles()) * horizon);
}

std::vector<double> autocorrelation(const PathEnsemble& ens) {
  if (ens.particles() == 0 || ens.points() == 0) throw DomainError("autocorrelation: empty ensemble");
  std::vector<double> c(ens.points(), 0.0);
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    const double x0 = ens.at(i, 0);
    for (std::size_t g = 0; g < ens.points(); ++g) c[g] += x0 * ens.at(i, g);
  }
  const double inv = 1.0 / static_cast<double>(ens.particles());
  for (double& v : c) v *= inv;
  return c;
}

// ---------------------------------------------------------------------------

MarginalPool::MarginalPool(std::span<const PathEnsemble> ensembles) {
  for (const auto& e : ensembles) add(e);
  finalize();
}

void MarginalPool::add(const PathEnsemble& ens) {
  if (sorted_.empty()) {
    grid_ = ens.grid;
    sorted_.resize(grid_.size());
  } else {
    check_same_grid(grid_, ens.grid);
  }
  finalized_ = false;
  for (std::size_t g = 0; g < ens.points(); ++g) {
    auto& column = sorted_[g];
    for (std::size_t i = 0; i < ens.particles(); ++i) column.push_back(ens.at(i, g));
  }
}

void MarginalPool::finalize() {
  if (finalized_) return;
  for (auto& column : sorted_) std::sort(column.begin(), column.end());
  finalized_ = true;
}

double w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("w2_empirical_1d: empty sample");
  // Quantile functions are step functions with breaks at i/n and j/m; walk the
  // merged breakpoints in units of 1/(n m).
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::size_t i = 0, j = 0, cursor = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::size_t next_a = (i + 1) * m;
    const std::size_t next_b = (j + 1) * n;
    const std::size_t next = std::min(next_a, next_b);
    const double d = a[i] - b[j];
    acc += static_cast<double>(next - cursor) * d * d;
    cursor = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return std::sqrt(acc / (static_cast<double>(n) * static_cast<double>(m)));
}

double marginal_w2_distance(const MarginalPool& a, const MarginalPool& b) {
  if (a.points() == 0 || b.points() == 0) throw DomainError("marginal_w2_distance: empty collection");
  check_same_grid(a.grid(), b.grid());
  const auto& grid = a.grid();
  if (grid.size() == 1) return w2_empirical_1d(a.at(0), b.at(0));
  std::vector<double> sq(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double w = w2_empirical_1d(a.at(g), b.at(g));
    sq[g] = w * w;
  }
  double integral = 0.0;
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) integral += 0.5 * (sq[g] + sq[g + 1]) * (grid[g + 1] - grid[g]);
  return std::sqrt(integral / (grid.back() - grid.front()));
}

double marginal_w2_distance(std::span<const PathEnsemble> a, std::span<const PathEnsemble> b) {
  if (a.empty() || b.empty()) throw DomainError("marginal_w2_distance: empty collection");
  return marginal_w2_distance(MarginalPool(a), MarginalPool(b));
}

// ---------------------------------------------------------------------------

double log1p_scaled_exp(double delta, double m) {
  if (delta <= 0.0) return 0.0;
  const double z = std::log(delta) + m;
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

GirsanovRecord girsanov_stats(const PathEnsemble& frozen, const DisorderMatrix& mat, const ModelParams& params,
                              const Potential& p, double c1) {
  params.validate();
  const std::size_t n = params.n_particles;
  const std::size_t kappa = params.kappa;
  const std::size_t m = params.substeps;
  if (frozen.particles() != n || frozen.points() != params.steps() + 1)
    throw DomainError("girsanov_stats: ensemble does not match the model grid");
  if (mat.size() != n) throw DomainError("girsanov_stats: disorder matrix size does not match N");
  if (!(c1 >= 0.0)) throw DomainError("girsanov_stats: c1 must be >= 0");
  const auto third = mat.law().abs_third_moment();
  if (!third.has_value()) throw DomainError("girsanov_stats: law '" + mat.law().name() + "' has no third absolute moment");

  GirsanovRecord rec;
  rec.kappa = kappa;
  rec.n = n;
  rec.c1 = c1;
  rec.b.assign(kappa * n, 0.0);
  rec.g.assign(kappa * n, 0.0);
  rec.m_big.assign(n, 0.0);
  rec.delta.assign(n, c1 * *third / std::sqrt(static_cast<double>(n)));

  const auto& grid = frozen.grid;
  for (std::size_t k = 0; k < kappa; ++k) {
    const std::size_t lo = k * m;
    const std::size_t hi = lo + m;
    const double width = grid[hi] - grid[lo];
    for (std::size_t i = 0; i < n; ++i) {
      double drift = 0.0;
      for (std::size_t gi = lo; gi < hi; ++gi)
        drift += 0.5 * (p.prime(frozen.at(i, gi)) + p.prime(frozen.at(i, gi + 1))) * (grid[gi + 1] - grid[gi]);
      rec.b[k * n + i] = (frozen.at(i, hi) - frozen.at(i, lo) - drift) / std::sqrt(width);
    }
  }

  // x_kj = beta sqrt(T) / sqrt(N kappa) X~_j at the left freeze point.
  const double weight = params.beta * std::sqrt(params.horizon) /
                        std::sqrt(static_cast<double>(n) * static_cast<double>(kappa));
  std::vector<double> xk(n);
  for (std::size_t k = 0; k < kappa; ++k) {
    for (std::size_t j = 0; j < n; ++j) xk[j] = weight * frozen.at(j, k * m);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = mat.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += xk[j] * row[j];
      rec.g[k * n + i] = acc;
    }
  }

  double phi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < kappa; ++k) sq += rec.b[k * n + i] * rec.b[k * n + i];
    rec.m_big[i] = 0.5 * sq;
    phi += log1p_scaled_exp(rec.delta[i], rec.m_big[i]);
  }
  rec.phi = phi / static_cast<double>(n);
  return rec;
}

}  // namespace spinlab
