#pragma once
//
// Path metrics, ensemble distances, autocorrelations and the Girsanov
// statistics of the frozen dynamics. All time integrals use the trapezoid
// rule on the simulation grid.
//

#include <cstddef>
#include <span>
#include <vector>

#include "spinlab/disorder.hpp"
#include "spinlab/model.hpp"

namespace spinlab {

// ((1/T) int_0^T (x - y)^2 dt)^{1/2} for paths on a uniform grid over [0, T].
double d2_path(std::span<const double> x, std::span<const double> y, double horizon);

// (1/(NT)) int ||X_t - Y_t||^2 dt. Upper bound on the squared W2 distance
// between the two empirical path measures.
double coupling_msd(const PathEnsemble& xs, const PathEnsemble& ys);

// C(t_g) = (1/N) sum_i X_0^i X_{t_g}^i
std::vector<double> autocorrelation(const PathEnsemble& ens);

// Pooled one-time marginals of a collection of ensembles on one grid.
class MarginalPool {
 public:
  MarginalPool() = default;
  explicit MarginalPool(std::span<const PathEnsemble> ensembles);

  void add(const PathEnsemble& ens);

  std::size_t points() const { return sorted_.size(); }
  std::size_t samples() const { return sorted_.empty() ? 0 : sorted_.front().size(); }
  const std::vector<double>& grid() const { return grid_; }
  // Sorted pooled sample at grid index g. Call finalize() first.
  std::span<const double> at(std::size_t g) const { return sorted_[g]; }

  void finalize();

 private:
  std::vector<double> grid_;
  std::vector<std::vector<double>> sorted_;
  bool finalized_ = false;
};

// Exact W2 distance between two empirical measures on the line.
double w2_empirical_1d(std::span<const double> sorted_a, std::span<const double> sorted_b);

// ((1/T) int W2(marginal_t^1, marginal_t^2)^2 dt)^{1/2}. A computable
// surrogate, bounded above by the path-space W2 distance; not d_W2 itself.
double marginal_w2_distance(const MarginalPool& a, const MarginalPool& b);
double marginal_w2_distance(std::span<const PathEnsemble> a, std::span<const PathEnsemble> b);

struct GirsanovRecord {
  std::size_t kappa = 0;
  std::size_t n = 0;
  std::vector<double> b;      // kappa x N, row k holds b_k^{(i)}
  std::vector<double> g;      // kappa x N, g_k^{(i)} = sum_j x_kj J_ij
  std::vector<double> m_big;  // M^{(i)} = |b^{(i)}|^2 / 2
  std::vector<double> delta;  // c1 N^{-3/2} sum_j E|J_ij|^3
  double phi = 0.0;           // (1/N) sum_i log(1 + delta_i e^{M_i})
  double c1 = 0.0;

  double b_at(std::size_t k, std::size_t i) const { return b[k * n + i]; }
  double g_at(std::size_t k, std::size_t i) const { return g[k * n + i]; }
};

GirsanovRecord girsanov_stats(const PathEnsemble& frozen, const DisorderMatrix& mat, const ModelParams& params,
                              const Potential& p, double c1);

// log(1 + delta e^{m}) without overflow.
double log1p_scaled_exp(double delta, double m);

}  // namespace spinlab
