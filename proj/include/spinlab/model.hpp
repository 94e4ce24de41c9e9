#pragma once
//
// Model parameters, confining potentials, initial laws, time grids and
// trajectory containers shared by the rest of the library.
//

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spinlab/rng.hpp"

namespace spinlab {

struct ModelParams {
  std::size_t n_particles = 1;
  double beta = 1.0;
  double s_bound = 2.0;
  double horizon = 1.0;
  std::size_t kappa = 1;     // number of frozen sub-intervals
  std::size_t substeps = 1;  // Euler steps per sub-interval
  std::uint64_t master_seed = 0;

  // Throws DomainError on any violated invariant.
  void validate() const;

  std::size_t steps() const { return kappa * substeps; }
  double step() const { return horizon / static_cast<double>(steps()); }

  // Time at grid index g, computed as g*h; the last point is exactly T.
  double time_at(std::size_t g) const;

  // Left endpoint of the k-th sub-interval, always a grid point.
  double freeze_time(std::size_t k) const { return time_at(k * substeps); }
};

// G+1 uniform grid times; freeze points sit at indices k*substeps.
std::vector<double> grid_times(const ModelParams& params);

class Potential {
 public:
  enum class Kind { LogBarrier, DoubleWell, Custom };
  using Map = std::function<double(double)>;

  // U(x) = -log(s^2 - x^2)
  static Potential log_barrier(double s);
  // U(x) = -log(s^2 - x^2) - x^2 + x^4/3, wells at +-1 when s = 2
  static Potential double_well(double s);
  // User potential; all three maps must be supplied.
  static Potential custom(double s, Map value, Map first, Map second, std::string name = "custom");

  Kind kind() const { return kind_; }
  double s_bound() const { return s_; }
  const std::string& name() const { return name_; }

  // Each throws DomainError when |x| >= s.
  double value(double x) const;
  double prime(double x) const;
  double double_prime(double x) const;

 private:
  Potential(Kind kind, double s, std::string name);

  void check_domain(double x) const;

  Kind kind_;
  double s_;
  std::string name_;
  Map value_;
  Map first_;
  Map second_;
};

// c'' = sup over the open interval of -U'', by dense evaluation at
// `samples` interior points.
double max_negative_curvature(const Potential& p, std::size_t samples = 20001);

// c'_eps = sup_{|x| <= s - eps} |U'(x)|, by dense evaluation.
double max_abs_slope(const Potential& p, double eps, std::size_t samples = 20001);

struct ConfinementSide {
  std::vector<double> points;  // evaluation points approaching the boundary
  std::vector<double> values;  // F at each point
  bool strictly_increasing = false;
};

// Divergence heuristic for the confinement integral
//   F(x) = int_0^x e^{2U(t)} (int_0^t e^{-2U(v)} dv) dt
// evaluated at x = +-s(1 - 10^{-j}). A finite computation cannot prove
// divergence; `pass` only means monotone growth past `threshold` on both
// sides.
struct ConfinementReport {
  std::vector<int> levels;
  ConfinementSide upper;
  ConfinementSide lower;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

ConfinementReport confinement_check(const Potential& p, std::span<const int> levels, double threshold = 1e3);

class InitialLaw {
 public:
  enum class Kind { PointMass, Uniform };

  // Both throw DomainError unless the support lies strictly inside (-s, s).
  static InitialLaw point_mass(double x0, double s);
  static InitialLaw uniform(double half_width, double s);

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  std::string describe() const;

  // Draw for particle i from a keyed stream.
  double sample(const CounterRng& rng, std::size_t i) const;

 private:
  InitialLaw(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_;
};

// N trajectories on the uniform grid, stored particle-major.
struct PathEnsemble {
  ModelParams params;
  std::vector<double> grid;
  std::vector<double> values;  // n_particles x grid.size()
  std::size_t safeguard_activations = 0;

  std::size_t particles() const { return params.n_particles; }
  std::size_t points() const { return grid.size(); }

  double at(std::size_t i, std::size_t g) const { return values[i * grid.size() + g]; }
  double& at(std::size_t i, std::size_t g) { return values[i * grid.size() + g]; }

  std::span<const double> path(std::size_t i) const {
    return {values.data() + i * grid.size(), grid.size()};
  }
};

PathEnsemble make_ensemble(const ModelParams& params);

}  // namespace spinlab
