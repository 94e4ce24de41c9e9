#pragma once
//
// Numerical certificate for the Lindeberg comparison of E exp(-h(J)) under a
// general entry law against the Gaussian one, for the quadratic
//
//   h(z) = |X z - b|^2 / 2,   X in R^{kappa x N}, b in R^kappa,
//
// together with the Gaussian determinant lower bound.
//

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinlab/disorder.hpp"

namespace spinlab {

class QuadraticForm {
 public:
  // x is row-major rows x cols; b has `rows` entries.
  QuadraticForm(std::size_t rows, std::size_t cols, std::vector<double> x, std::vector<double> b);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double x(std::size_t k, std::size_t j) const { return x_[k * cols_ + j]; }
  std::span<const double> x_data() const { return x_; }
  std::span<const double> b() const { return b_; }

  // (X^T X)_jj
  double column_norm2(std::size_t j) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> x_;
  std::vector<double> b_;
};

double h_eval(const QuadraticForm& q, std::span<const double> z);

// c0 = e^{-sqrt3/2} (3^{1/4} + 3^{-1/4}) / 2
double lindeberg_constant();

// c0 sum_j (X^T X)_jj^{3/2} (E|J|^3 + E|Z|^3)
double lindeberg_bound(const QuadraticForm& q, const DisorderLaw& law);

struct GaussianExpectation {
  double value = 0.0;        // E exp(-h(Z)), Z standard Gaussian
  double lower_bound = 0.0;  // exp(-h(0)) det(I + X X^T)^{-1/2}
  double log_det = 0.0;      // log det(I + X X^T), kappa x kappa
};

GaussianExpectation gaussian_expectation_exact(const QuadraticForm& q);

// log det(I + X^T X) computed on the N x N side.
double log_det_gram_columns(const QuadraticForm& q);

// E exp(-h(J)) by enumeration of all 2^N sign vectors (Rademacher, N <= 20).
double expectation_exact_discrete(const QuadraticForm& q, const DisorderLaw& law);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

McEstimate expectation_mc(const QuadraticForm& q, const DisorderLaw& law, std::size_t samples, std::uint64_t seed,
                          std::size_t threads = 1);

struct CertificateOptions {
  std::size_t instances = 500;
  std::size_t max_kappa = 3;
  std::size_t max_n = 12;
  double beta = 1.0;
  double horizon = 2.0;
  double s_bound = 2.0;
  std::uint64_t seed = 1;
  double tolerance = 1e-10;
  std::size_t mc_instances = 0;  // first instances also checked by Monte Carlo
  std::size_t mc_samples = 1000000;
};

struct CertificateInstance {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t kappa = 0;
  std::size_t n = 0;
  double exact_discrete = 0.0;
  double gaussian_exact = 0.0;
  double lhs = 0.0;
  double bound = 0.0;
  double slack_ratio = 0.0;  // lhs / bound, 0 when both vanish
  double det_lower = 0.0;
  double sylvester_gap = 0.0;
  bool lindeberg_ok = false;
  bool det_ok = false;
  std::optional<McEstimate> mc;
  bool mc_ok = true;
};

struct CertificateResult {
  std::vector<CertificateInstance> instances;
  std::size_t lindeberg_pass = 0;
  std::size_t det_pass = 0;
  std::size_t mc_checked = 0;
  std::size_t mc_pass = 0;
  double worst_slack_ratio = 0.0;
  bool pass() const {
    return lindeberg_pass == instances.size() && det_pass == instances.size() && mc_pass == mc_checked;
  }
};

// Random instance: kappa <= max_kappa, N <= max_n, entries of X equal to
// beta sqrt(T)/sqrt(N kappa) times uniform values in [-s, s], b standard
// normal.
QuadraticForm certificate_instance(const CertificateOptions& opts, std::size_t index);

CertificateResult run_certificate(const CertificateOptions& opts, std::size_t threads = 1);

}  // namespace spinlab
