#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spinlab/errors.hpp"
#include "spinlab/model.hpp"

using namespace spinlab;

namespace {

double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// F(x) = int_0^x e^{2U(t)} int_0^t e^{-2U(v)} dv dt by nested tanh-sinh.
double confinement_oracle(const Potential& p, double x) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto inner = [&](double t) {
    if (t <= 0.0) return 0.0;
    return ts.integrate([&](double v) { return std::exp(-2.0 * p.value(v)); }, 0.0, t);
  };
  return ts.integrate([&](double t) { return std::exp(2.0 * p.value(t)) * inner(t); }, 0.0, x);
}

}  // namespace

TEST_CASE("model parameters and grid") {
  ModelParams p{4, 1.0, 2.0, 2.0, 3, 7, 1};
  CHECK_NOTHROW(p.validate());
  CHECK(p.steps() == 21);
  const auto grid = grid_times(p);
  REQUIRE(grid.size() == 22);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 2.0);
  CHECK(p.freeze_time(1) == grid[7]);
  CHECK(grid[5] == doctest::Approx(5.0 * 2.0 / 21.0).epsilon(1e-15));

  auto bad = p;
  bad.n_particles = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.horizon = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.kappa = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.s_bound = std::nan("");
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("double well derivatives match finite differences") {
  const auto p = Potential::double_well(2.0);
  auto u = [&](double x) { return p.value(x); };
  auto du = [&](double x) { return p.prime(x); };
  for (double x : {-1.9, -1.2, -0.3, 0.0, 0.4, 1.0, 1.7, 1.99}) {
    const double h = 1e-6 * std::min(1.0, 2.0 - std::abs(x));
    CHECK(p.prime(x) == doctest::Approx(central_diff(u, x, h)).epsilon(1e-6));
    CHECK(p.double_prime(x) == doctest::Approx(central_diff(du, x, h)).epsilon(1e-6));
  }
  // Wells at +-1 for s = 2.
  CHECK(std::abs(p.prime(1.0)) < 1e-15);
  CHECK(std::abs(p.prime(-1.0)) < 1e-15);
  CHECK(p.value(0.7) == doctest::Approx(p.value(-0.7)));
  CHECK(p.value(0.5) == doctest::Approx(-std::log(4.0 - 0.25) - 0.25 + 0.0625 / 3.0));
}

TEST_CASE("log barrier closed forms") {
  const auto p = Potential::log_barrier(1.5);
  CHECK(p.value(0.0) == doctest::Approx(-std::log(2.25)));
  CHECK(p.prime(1.0) == doctest::Approx(2.0 / 1.25));
  CHECK(p.double_prime(1.0) == doctest::Approx(2.0 * 3.25 / (1.25 * 1.25)));
  CHECK(max_negative_curvature(p) < 0.0);
  // |U'| is increasing in |x| so the sup sits at s - eps.
  const double edge = 1.5 - 0.1;
  CHECK(max_abs_slope(p, 0.1) == doctest::Approx(2.0 * edge / (2.25 - edge * edge)));
}

TEST_CASE("potentials reject points outside the open interval") {
  const auto p = Potential::double_well(2.0);
  CHECK_THROWS_AS(p.value(2.0), DomainError);
  CHECK_THROWS_AS(p.prime(-2.5), DomainError);
  CHECK_THROWS_AS(p.double_prime(std::nan("")), DomainError);
  CHECK_THROWS_AS(Potential::log_barrier(0.0), DomainError);
  CHECK_THROWS_AS(max_abs_slope(p, 3.0), DomainError);
}

TEST_CASE("double well curvature constant") {
  // -U'' is maximal at the origin: 2 - 2 s^2 / s^4 = 3/2 for s = 2.
  CHECK(max_negative_curvature(Potential::double_well(2.0)) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("custom potential") {
  const auto p = Potential::custom(
      1.0, [](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }, "quad");
  CHECK(p.kind() == Potential::Kind::Custom);
  CHECK(p.name() == "quad");
  CHECK(p.prime(0.5) == 1.0);
  CHECK_THROWS_AS(p.value(1.0), DomainError);
  CHECK_THROWS_AS(Potential::custom(1.0, nullptr, nullptr, nullptr), DomainError);
}

TEST_CASE("confinement values agree with a tanh-sinh oracle") {
  const auto p = Potential::double_well(2.0);
  const std::vector<int> levels = {1, 2, 3};
  const auto rep = confinement_check(p, levels, 100.0);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double x = 2.0 * (1.0 - std::pow(10.0, -levels[k]));
    CHECK(rep.upper.points[k] == doctest::Approx(x));
    CHECK(rep.upper.values[k] == doctest::Approx(confinement_oracle(p, x)).epsilon(1e-7));
  }
  CHECK(rep.upper.strictly_increasing);
  CHECK(rep.lower.strictly_increasing);
  CHECK(rep.pass);
}

TEST_CASE("confinement check passes for both built-in potentials") {
  const std::vector<int> levels = {1, 2, 3, 4, 5, 6};
  CHECK(confinement_check(Potential::double_well(2.0), levels).pass);
  CHECK(confinement_check(Potential::log_barrier(1.0), levels).pass);
}

TEST_CASE("confinement check fails without a barrier") {
  // Flat potential: F(x) = x^2 / 2 stays bounded on (-s, s).
  const auto flat = Potential::custom(
      2.0, [](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }, "flat");
  const std::vector<int> levels = {1, 2, 3, 4};
  const auto rep = confinement_check(flat, levels);
  CHECK(rep.upper.values.back() == doctest::Approx(0.5 * std::pow(2.0 * (1.0 - 1e-4), 2)).epsilon(1e-9));
  CHECK_FALSE(rep.pass);
  const std::vector<int> unordered = {2, 1};
  CHECK_THROWS_AS(confinement_check(flat, unordered), DomainError);
}

TEST_CASE("initial laws") {
  CHECK_THROWS_AS(InitialLaw::point_mass(2.0, 2.0), DomainError);
  CHECK_THROWS_AS(InitialLaw::uniform(2.0, 2.0), DomainError);
  CHECK_THROWS_AS(InitialLaw::uniform(0.0, 2.0), DomainError);
  const auto point = InitialLaw::point_mass(0.25, 2.0);
  const CounterRng rng(9);
  CHECK(point.sample(rng, 17) == 0.25);
  CHECK(point.describe() == "point:0.25");

  const auto uni = InitialLaw::uniform(1.0, 2.0);
  CHECK(uni.describe() == "uniform:1");
  double sum = 0.0, sum2 = 0.0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = uni.sample(rng, i);
    REQUIRE(std::abs(x) < 1.0);
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 5.0 * std::sqrt(1.0 / 3.0 / n));
  CHECK(sum2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("path ensemble layout") {
  ModelParams p{3, 0.0, 2.0, 1.0, 2, 2, 0};
  auto ens = make_ensemble(p);
  CHECK(ens.points() == 5);
  CHECK(ens.values.size() == 15);
  ens.at(1, 3) = 7.0;
  CHECK(ens.path(1)[3] == 7.0);
  CHECK(ens.values[1 * 5 + 3] == 7.0);
}
