#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spinlab/dynamics.hpp"
#include "spinlab/observables.hpp"

using namespace spinlab;

namespace {

// W2 between two empirical measures by expanding both to n*m equal atoms.
double w2_expanded(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> xa, xb;
  for (double v : a) xa.insert(xa.end(), m, v);
  for (double v : b) xb.insert(xb.end(), n, v);
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < xa.size(); ++k) acc += (xa[k] - xb[k]) * (xa[k] - xb[k]);
  return std::sqrt(acc / static_cast<double>(xa.size()));
}

PathEnsemble constant_ensemble(std::size_t n, std::size_t steps, double value) {
  ModelParams p{n, 0.0, 2.0, 1.0, 1, steps, 0};
  auto e = make_ensemble(p);
  std::fill(e.values.begin(), e.values.end(), value);
  return e;
}

}  // namespace

TEST_CASE("path distance") {
  std::vector<double> x(11, 0.5), y(11, -0.25);
  CHECK(d2_path(x, y, 3.0) == doctest::Approx(0.75));
  // Linear difference d(t) = t on [0, 1]: trapezoid of t^2 with h = 0.1.
  std::vector<double> ramp(11), zero(11, 0.0);
  for (std::size_t g = 0; g <= 10; ++g) ramp[g] = 0.1 * g;
  CHECK(d2_path(ramp, zero, 1.0) == doctest::Approx(std::sqrt(0.335)));
  CHECK_THROWS_AS(d2_path(x, std::vector<double>(3), 1.0), DomainError);
}

TEST_CASE("exact one-dimensional W2") {
  const CounterRng rng(3);
  for (std::size_t n : {1u, 3u, 7u})
    for (std::size_t m : {1u, 2u, 5u, 7u}) {
      std::vector<double> a(n), b(m);
      for (std::size_t k = 0; k < n; ++k) a[k] = rng.normal(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(n));
      for (std::size_t k = 0; k < m; ++k) b[k] = rng.normal(static_cast<std::uint32_t>(k), 100 + static_cast<std::uint32_t>(m)) + 0.3;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(w2_empirical_1d(a, b) == doctest::Approx(w2_expanded(a, b)).epsilon(1e-12));
    }
  std::vector<double> a = {-1.0, 0.0, 2.0}, shifted = {-0.5, 0.5, 2.5};
  CHECK(w2_empirical_1d(a, shifted) == doctest::Approx(0.5));
  CHECK(w2_empirical_1d(a, a) == 0.0);
}

TEST_CASE("autocorrelation and msd") {
  ModelParams p{2, 0.0, 2.0, 1.0, 1, 2, 0};
  auto e = make_ensemble(p);
  // particle 0: 1, 0.5, -1; particle 1: -0.5, -0.5, 0
  e.at(0, 0) = 1.0;
  e.at(0, 1) = 0.5;
  e.at(0, 2) = -1.0;
  e.at(1, 0) = -0.5;
  e.at(1, 1) = -0.5;
  e.at(1, 2) = 0.0;
  const auto c = autocorrelation(e);
  CHECK(c[0] == doctest::Approx((1.0 + 0.25) / 2));
  CHECK(c[1] == doctest::Approx((0.5 + 0.25) / 2));
  CHECK(c[2] == doctest::Approx(-0.5));

  const auto z = constant_ensemble(2, 2, 0.0);
  // squared distances per time: 1.25, 0.5, 1; trapezoid with h = 0.5.
  CHECK(coupling_msd(e, z) == doctest::Approx((0.25 * 1.25 + 0.5 * 0.5 + 0.25 * 1.0) / 2.0));
}

TEST_CASE("marginal W2 surrogate") {
  const auto a = constant_ensemble(4, 3, 0.2);
  const auto b = constant_ensemble(5, 3, -0.1);
  CHECK(marginal_w2_distance(std::span(&a, 1), std::span(&b, 1)) == doctest::Approx(0.3));
  CHECK(marginal_w2_distance(std::span(&a, 1), std::span(&a, 1)) == 0.0);

  ModelParams p{10, 1.0, 2.0, 1.0, 2, 5, 1};
  const auto pot = Potential::double_well(2.0);
  const auto init = InitialLaw::uniform(1.0, 2.0);
  const auto x = simulate_full(p, pot, sample_matrix(DisorderLaw::gaussian(), 10, 1), init, 0);
  const auto y = simulate_full(p, pot, sample_matrix(DisorderLaw::rademacher(), 10, 2), init, 0);
  // Bounded above by the coupling distance (any coupling dominates W2).
  const double w = marginal_w2_distance(std::span(&x, 1), std::span(&y, 1));
  CHECK(w > 0.0);
  CHECK(w * w <= coupling_msd(x, y) * (1.0 + 1e-12));

  MarginalPool pool;
  pool.add(x);
  pool.add(y);
  pool.finalize();
  CHECK(pool.samples() == 20);
  CHECK(std::is_sorted(pool.at(3).begin(), pool.at(3).end()));
}

TEST_CASE("log1p of a scaled exponential") {
  CHECK(log1p_scaled_exp(0.0, 5.0) == 0.0);
  CHECK(log1p_scaled_exp(0.3, 2.0) == doctest::Approx(std::log1p(0.3 * std::exp(2.0))));
  CHECK(log1p_scaled_exp(1e-3, 0.1) == doctest::Approx(std::log1p(1e-3 * std::exp(0.1))));
  CHECK(log1p_scaled_exp(2.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(std::isfinite(log1p_scaled_exp(1.0, 1e6)));
}

TEST_CASE("girsanov statistics") {
  ModelParams p{6, 0.9, 2.0, 2.0, 4, 5, 17};
  const auto pot = Potential::double_well(2.0);
  const auto init = InitialLaw::uniform(1.0, 2.0);
  const auto mat = sample_matrix(DisorderLaw::rademacher(), 6, 5);
  const auto frozen = simulate_frozen(p, pot, mat, init, 2);
  const auto rec = girsanov_stats(frozen, mat, p, pot, 1.0);
  REQUIRE(rec.kappa == 4);
  REQUIRE(rec.n == 6);

  const double dk = 2.0 / 4.0;
  const double h = 2.0 / 20.0;
  double phi = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    double m_big = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      double drift = 0.0;
      for (std::size_t g = 5 * k; g < 5 * k + 5; ++g)
        drift += 0.5 * h * (pot.prime(frozen.at(i, g)) + pot.prime(frozen.at(i, g + 1)));
      const double b = (frozen.at(i, 5 * k + 5) - frozen.at(i, 5 * k) - drift) / std::sqrt(dk);
      CHECK(rec.b_at(k, i) == doctest::Approx(b).epsilon(1e-12));
      double g_ki = 0.0;
      for (std::size_t j = 0; j < 6; ++j)
        g_ki += 0.9 * std::sqrt(2.0) / std::sqrt(6.0 * 4.0) * frozen.at(j, 5 * k) * mat.entry(i, j);
      CHECK(rec.g_at(k, i) == doctest::Approx(g_ki).epsilon(1e-12));
      m_big += 0.5 * b * b;
    }
    CHECK(rec.m_big[i] == doctest::Approx(m_big).epsilon(1e-12));
    const double delta = 1.0 / std::sqrt(6.0);
    CHECK(rec.delta[i] == doctest::Approx(delta));
    phi += std::log1p(delta * std::exp(m_big));
  }
  CHECK(rec.phi == doctest::Approx(phi / 6.0).epsilon(1e-12));

  const auto none = DisorderLaw::custom("nomoments", [](const DrawSource& s) { return s.normal(); });
  const auto bare = sample_matrix(none, 6, 5);
  CHECK_THROWS_AS(girsanov_stats(frozen, bare, p, pot, 1.0), DomainError);
}
