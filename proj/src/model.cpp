#include "spinlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spinlab/errors.hpp"

namespace spinlab {

void ModelParams::validate() const {
  if (n_particles < 1) throw DomainError("n_particles must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta must be finite and >= 0");
  if (!(s_bound > 0.0) || !std::isfinite(s_bound)) throw DomainError("s_bound must be finite and > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be finite and > 0");
  if (kappa < 1) throw DomainError("kappa must be >= 1");
  if (substeps < 1) throw DomainError("substeps must be >= 1");
}

double ModelParams::time_at(std::size_t g) const {
  const std::size_t total = steps();
  if (g >= total) return horizon;
  return static_cast<double>(g) * step();
}

std::vector<double> grid_times(const ModelParams& params) {
  params.validate();
  std::vector<double> grid(params.steps() + 1);
  for (std::size_t g = 0; g < grid.size(); ++g) grid[g] = params.time_at(g);
  return grid;
}

PathEnsemble make_ensemble(const ModelParams& params) {
  PathEnsemble ens;
  ens.params = params;
  ens.grid = grid_times(params);
  ens.values.assign(params.n_particles * ens.grid.size(), 0.0);
  return ens;
}

// ---------------------------------------------------------------------------
// Potential

Potential::Potential(Kind kind, double s, std::string name) : kind_(kind), s_(s), name_(std::move(name)) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("potential half-width must be finite and > 0");
}

// s^2 - x^2, factored to keep relative accuracy near the barrier.
static double barrier_gap(double s, double x) { return (s - x) * (s + x); }

Potential Potential::log_barrier(double s) {
  Potential p(Kind::LogBarrier, s, "log_barrier");
  p.value_ = [s](double x) { return -std::log(barrier_gap(s, x)); };
  p.first_ = [s](double x) { return 2.0 * x / barrier_gap(s, x); };
  p.second_ = [s](double x) {
    const double d = barrier_gap(s, x);
    return 2.0 * (s * s + x * x) / (d * d);
  };
  return p;
}

Potential Potential::double_well(double s) {
  Potential p(Kind::DoubleWell, s, "double_well");
  p.value_ = [s](double x) {
    const double x2 = x * x;
    return -std::log(barrier_gap(s, x)) - x2 + x2 * x2 / 3.0;
  };
  p.first_ = [s](double x) {
    const double x2 = x * x;
    return 2.0 * x / barrier_gap(s, x) - 2.0 * x + (4.0 / 3.0) * x2 * x;
  };
  p.second_ = [s](double x) {
    const double x2 = x * x;
    const double d = barrier_gap(s, x);
    return 2.0 * (s * s + x2) / (d * d) - 2.0 + 4.0 * x2;
  };
  return p;
}

Potential Potential::custom(double s, Map value, Map first, Map second, std::string name) {
  if (!value || !first || !second) throw DomainError("custom potential needs U, U' and U''");
  Potential p(Kind::Custom, s, std::move(name));
  p.value_ = std::move(value);
  p.first_ = std::move(first);
  p.second_ = std::move(second);
  return p;
}

void Potential::check_domain(double x) const {
  if (!(std::abs(x) < s_)) {
    std::ostringstream msg;
    msg << "potential '" << name_ << "' evaluated at x=" << x << " outside (-" << s_ << ", " << s_ << ")";
    throw DomainError(msg.str());
  }
}

double Potential::value(double x) const {
  check_domain(x);
  return value_(x);
}

double Potential::prime(double x) const {
  check_domain(x);
  return first_(x);
}

double Potential::double_prime(double x) const {
  check_domain(x);
  return second_(x);
}

namespace {

template <class F>
double sup_on_interior(double half_width, std::size_t samples, F f) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= samples; ++k) {
    const double x = half_width * (2.0 * static_cast<double>(k) / static_cast<double>(samples + 1) - 1.0);
    best = std::max(best, f(x));
  }
  return best;
}

}  // namespace

double max_negative_curvature(const Potential& p, std::size_t samples) {
  return sup_on_interior(p.s_bound(), samples, [&](double x) { return -p.double_prime(x); });
}

double max_abs_slope(const Potential& p, double eps, std::size_t samples) {
  if (!(eps > 0.0) || eps >= p.s_bound()) throw DomainError("max_abs_slope: eps must lie in (0, s)");
  const double half = p.s_bound() - eps;
  double best = std::abs(p.prime(half));
  best = std::max(best, std::abs(p.prime(-half)));
  return std::max(best, sup_on_interior(half, samples, [&](double x) { return std::abs(p.prime(x)); }));
}

// ---------------------------------------------------------------------------
// Confinement heuristic

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

// Near the barrier the integrand is ~(s - t)^{-2} and the nodes themselves
// carry absolute rounding, so the Kronrod error estimate stalls well above
// machine precision even when the value has converged. Consecutive levels
// differ by about a factor of ten, so 1e-4 relative is ample for the check.
constexpr unsigned kMaxDepth = 8;
constexpr double kQuadTol = 1e-9;
constexpr double kAcceptRelative = 1e-4;

// F on the side given by `sign`, as a positive integral over [0, x]. The range
// is cut at s(1 - 10^{-k}) so each piece sees a bounded dynamic range, and the
// inner integral is carried forward piece by piece. Within a piece the inner
// integrand is smooth, so a single fixed Kronrod panel keeps the outer
// integrand free of adaptive noise.
double confinement_integral(const Potential& p, double sign, double x, int level) {
  const double s = p.s_bound();
  std::vector<double> cuts = {0.0};
  for (int k = 1; k < level; ++k) cuts.push_back(s * (1.0 - std::pow(10.0, -static_cast<double>(k))));
  cuts.push_back(x);

  auto weight = [&](double v) { return std::exp(-2.0 * p.value(sign * v)); };
  double f = 0.0, f_err = 0.0, inner_base = 0.0;
  for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
    const double a = cuts[piece];
    const double b = cuts[piece + 1];
    auto inner = [&](double t) { return inner_base + Kronrod::integrate(weight, a, t, 0, 0.0); };
    double err = 0.0;
    f += Kronrod::integrate([&](double t) { return std::exp(2.0 * p.value(sign * t)) * inner(t); }, a, b, kMaxDepth,
                            kQuadTol, &err);
    f_err += err;
    inner_base += Kronrod::integrate(weight, a, b, 0, 0.0);
  }
  if (!std::isfinite(f) || !std::isfinite(f_err) || f_err > kAcceptRelative * std::abs(f)) {
    std::ostringstream msg;
    msg << "confinement quadrature failed at level " << level << " (x=" << sign * x << ", value=" << f
        << ", error estimate=" << f_err << ")";
    throw NumericalError(msg.str());
  }
  return f;
}

ConfinementSide evaluate_side(const Potential& p, double sign, std::span<const int> levels) {
  ConfinementSide side;
  for (int j : levels) {
    const double x = p.s_bound() * (1.0 - std::pow(10.0, -static_cast<double>(j)));
    side.points.push_back(sign * x);
    side.values.push_back(confinement_integral(p, sign, x, j));
  }
  side.strictly_increasing = true;
  for (std::size_t k = 1; k < side.values.size(); ++k) {
    if (!(side.values[k] > side.values[k - 1])) side.strictly_increasing = false;
  }
  return side;
}

}  // namespace

ConfinementReport confinement_check(const Potential& p, std::span<const int> levels, double threshold) {
  if (levels.empty()) throw DomainError("confinement_check needs at least one level");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 1) throw DomainError("confinement levels must be >= 1");
    if (k > 0 && levels[k] <= levels[k - 1]) throw DomainError("confinement levels must be increasing");
  }
  ConfinementReport report;
  report.levels.assign(levels.begin(), levels.end());
  report.threshold = threshold;
  report.upper = evaluate_side(p, +1.0, levels);
  report.lower = evaluate_side(p, -1.0, levels);
  const bool upper_ok = report.upper.strictly_increasing && report.upper.values.back() > threshold;
  const bool lower_ok = report.lower.strictly_increasing && report.lower.values.back() > threshold;
  report.pass = upper_ok && lower_ok;
  report.note = "heuristic: monotone growth toward the boundary, not a proof of divergence";
  return report;
}

// ---------------------------------------------------------------------------
// Initial laws

InitialLaw InitialLaw::point_mass(double x0, double s) {
  if (!std::isfinite(x0) || !(std::abs(x0) < s)) throw DomainError("point mass must lie strictly inside (-s, s)");
  return InitialLaw(Kind::PointMass, x0);
}

InitialLaw InitialLaw::uniform(double half_width, double s) {
  if (!(half_width > 0.0) || !(half_width < s)) throw DomainError("uniform half-width must lie in (0, s)");
  return InitialLaw(Kind::Uniform, half_width);
}

std::string InitialLaw::describe() const {
  std::ostringstream out;
  out << (kind_ == Kind::PointMass ? "point:" : "uniform:") << param_;
  return out.str();
}

double InitialLaw::sample(const CounterRng& rng, std::size_t i) const {
  if (kind_ == Kind::PointMass) return param_;
  const double u = rng.uniform(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), 0, 0);
  return param_ * (2.0 * u - 1.0);
}

}  // namespace spinlab
