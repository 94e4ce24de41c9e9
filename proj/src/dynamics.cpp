#include "spinlab/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace spinlab {

BrownianStream::BrownianStream(std::uint64_t master_seed, std::uint64_t replica, std::string_view purpose)
    : master_seed_(master_seed),
      replica_(replica),
      increments_(derive_seed(master_seed, {hash_tag(purpose), replica})),
      initial_(derive_seed(master_seed, {hash_tag(purpose), replica, hash_tag("initial")})) {}

double BrownianStream::increment(std::size_t i, std::size_t g, double h) const {
  return std::sqrt(h) * increments_.normal(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(g), 0, 0);
}

double BrownianStream::bridge_normal(std::size_t i, std::size_t g, std::uint64_t node) const {
  return increments_.normal(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(g),
                            static_cast<std::uint32_t>(node), static_cast<std::uint32_t>(node >> 32));
}

std::vector<double> sample_initial(const InitialLaw& law, std::size_t n, const BrownianStream& stream) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = law.sample(stream.initial_rng(), i);
  return x;
}

namespace {

std::string safeguard_message(std::size_t particle, std::size_t step, double proposed) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "boundary safeguard failed for particle " << particle << " at step " << step << " (proposed value "
      << proposed << " after " << kMaxHalvings << " halvings)";
  return msg.str();
}

}  // namespace

SafeguardError::SafeguardError(std::size_t particle, std::size_t step, double proposed)
    : NumericalError(safeguard_message(particle, step, proposed)), particle_(particle), step_(step), proposed_(proposed) {}

namespace {

struct StepContext {
  const Potential& potential;
  const BrownianStream& stream;
  double limit;
  std::size_t particle;
  std::size_t step;
};

// One Euler step for one coordinate with the interaction `push` held fixed.
// A proposal outside the safe band is redone as two half steps whose Brownian
// increments are split by a bridge draw, recursively.
double advance(const StepContext& ctx, double x, double dt, double push, double dB, int depth, std::uint64_t node) {
  const double proposed = x + dt * (push - ctx.potential.prime(x)) + dB;
  if (std::abs(proposed) < ctx.limit) return proposed;
  if (depth == kMaxHalvings) throw SafeguardError(ctx.particle, ctx.step, proposed);
  const double first = 0.5 * dB + std::sqrt(0.25 * dt) * ctx.stream.bridge_normal(ctx.particle, ctx.step, node);
  const double mid = advance(ctx, x, 0.5 * dt, push, first, depth + 1, 2 * node);
  return advance(ctx, mid, 0.5 * dt, push, dB - first, depth + 1, 2 * node + 1);
}

// Shared integrator: the interaction A x is refreshed every `refresh` steps.
// refresh = 1 is the full dynamics, refresh = substeps the frozen one.
PathEnsemble integrate(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                       const InitialLaw& init, std::uint64_t replica, std::size_t refresh) {
  params.validate();
  const std::size_t n = params.n_particles;
  if (mat.size() != n) throw DomainError("disorder matrix size does not match n_particles");
  if (p.s_bound() != params.s_bound) throw DomainError("potential half-width does not match s_bound");

  const BrownianStream stream(params.master_seed, replica);
  PathEnsemble ens = make_ensemble(params);
  std::vector<double> x = sample_initial(init, n, stream);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(std::abs(x[i]) < params.s_bound)) throw DomainError("initial state outside (-s, s)");
    ens.at(i, 0) = x[i];
  }

  const double h = params.step();
  const double limit = params.s_bound * (1.0 - kBoundaryMargin);
  std::vector<double> push(n, 0.0);
  for (std::size_t g = 0; g < params.steps(); ++g) {
    if (g % refresh == 0) mat.apply_scaled(params.beta, x, push);
    for (std::size_t i = 0; i < n; ++i) {
      const double dB = stream.increment(i, g, h);
      const double proposed = x[i] + h * (push[i] - p.prime(x[i])) + dB;
      if (std::abs(proposed) < limit) {
        x[i] = proposed;
      } else {
        ++ens.safeguard_activations;
        const StepContext ctx{p, stream, limit, i, g};
        const double first = 0.5 * dB + std::sqrt(0.25 * h) * stream.bridge_normal(i, g, 1);
        const double mid = advance(ctx, x[i], 0.5 * h, push[i], first, 1, 2);
        x[i] = advance(ctx, mid, 0.5 * h, push[i], dB - first, 1, 3);
      }
      ens.at(i, g + 1) = x[i];
    }
  }
  return ens;
}

}  // namespace

PathEnsemble simulate_full(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                           const InitialLaw& init, std::uint64_t replica) {
  return integrate(params, p, mat, init, replica, 1);
}

PathEnsemble simulate_frozen(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                             const InitialLaw& init, std::uint64_t replica) {
  return integrate(params, p, mat, init, replica, params.substeps);
}

CoupledRun simulate_coupled(const ModelParams& params, const Potential& p, const DisorderMatrix& mat,
                            const InitialLaw& init, std::uint64_t replica) {
  CoupledRun run{simulate_full(params, p, mat, init, replica), simulate_frozen(params, p, mat, init, replica), {}};
  const std::size_t n = params.n_particles;
  const std::size_t points = run.full.points();
  std::vector<double> sq(points, 0.0);
  run.stats.r_t.assign(points, 0.0);
  run.stats.l_t.assign(points, 0.0);
  for (std::size_t g = 0; g < points; ++g) {
    const std::size_t anchor = (g / params.substeps) * params.substeps;
    double lag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = run.frozen.at(i, g) - run.full.at(i, g);
      sq[g] += d * d;
      const double l = run.frozen.at(i, anchor) - run.frozen.at(i, g);
      lag += l * l;
    }
    run.stats.r_t[g] = std::sqrt(sq[g]);
    run.stats.l_t[g] = std::sqrt(lag);
  }
  double integral = 0.0;
  for (std::size_t g = 0; g + 1 < points; ++g)
    integral += 0.5 * (sq[g] + sq[g + 1]) * (run.full.grid[g + 1] - run.full.grid[g]);
  run.stats.msd = integral / (static_cast<double>(n) * params.horizon);
  return run;
}

std::vector<double> coupling_envelope(double a2, double c_dd, double rho, std::size_t n,
                                      std::span<const double> times) {
  if (!(a2 > 0.0)) throw DomainError("coupling_envelope: a2 must be > 0");
  if (!(rho > 0.0)) throw DomainError("coupling_envelope: rho must be > 0");
  const double rate = a2 + c_dd;
  const double scale = rho * std::sqrt(static_cast<double>(n));
  std::vector<double> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    out[k] = rate == 0.0 ? 3.0 * a2 * t * scale : 3.0 * a2 / rate * std::expm1(rate * t) * scale;
  }
  return out;
}

}  // namespace spinlab
