#pragma once
//
// Euler-Maruyama integration of the interacting soft-spin diffusion
//
//   dX_i = dB_i - U'(X_i) dt + (beta/sqrt(N)) sum_j J_ij X_j dt,
//
// its piecewise-frozen approximation, and the pair coupled through one
// Brownian path.
//

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spinlab/disorder.hpp"
#include "spinlab/errors.hpp"
#include "spinlab/model.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

// Brownian increments for one replica. The increment of particle i over grid
// step g is a function of (master_seed, replica, purpose, i, g) only.
class BrownianStream {
 public:
  BrownianStream(std::uint64_t master_seed, std::uint64_t replica, std::string_view purpose = "brownian");

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t replica() const { return replica_; }

  // Normal(0, h) increment.
  double increment(std::size_t i, std::size_t g, double h) const;

  // Standard normal attached to a node of the step-halving tree (root = 1).
  double bridge_normal(std::size_t i, std::size_t g, std::uint64_t node) const;

  // Independent keyed stream for initial conditions of this replica.
  const CounterRng& initial_rng() const { return initial_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t replica_;
  CounterRng increments_;
  CounterRng initial_;
};

std::vector<double> sample_initial(const InitialLaw& law, std::size_t n, const BrownianStream& stream);

// Thrown when step halving cannot keep a coordinate inside the barrier.
class SafeguardError : public NumericalError {
 public:
  SafeguardError(std::size_t particle, std::size_t step, double proposed);

  std::size_t particle() const { return particle_; }
  std::size_t step() const { return step_; }
  double proposed() const { return proposed_; }

 private:
  std::size_t particle_;
  std::size_t step_;
  double proposed_;
};

inline constexpr double kBoundaryMargin = 1e-6;
inline constexpr int kMaxHalvings = 40;

PathEnsemble simulate_full(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                           const InitialLaw& init, std::uint64_t replica);

PathEnsemble simulate_frozen(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                             const InitialLaw& init, std::uint64_t replica);

struct CouplingStats {
  std::vector<double> r_t;  // ||X~_t - X_t||_2 per grid time
  std::vector<double> l_t;  // ||X~_{freeze point} - X~_t||_2 per grid time
  double msd = 0.0;         // (1/(NT)) int ||X_t - X~_t||^2 dt, trapezoid
};

struct CoupledRun {
  PathEnsemble full;
  PathEnsemble frozen;
  CouplingStats stats;
};

CoupledRun simulate_coupled(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                            const InitialLaw& init, std::uint64_t replica);

// Solution of the comparison ODE for R_t with equality, started at zero:
//   (3 a2 / (a2 + c'')) (e^{(a2 + c'') t} - 1) rho sqrt(N).
std::vector<double> coupling_envelope(double a2, double c_dd, double rho, std::size_t n,
                                      std::span<const double> times);

}  // namespace spinlab
