#pragma once
//
// Quenched disorder: entry laws, reproducible matrix sampling, operator norms
// and the moment/tail diagnostics of the disorder assumptions.
//

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinlab/errors.hpp"
#include "spinlab/rng.hpp"

namespace spinlab {

// Analytic moments a custom law may declare. Missing entries are unknown.
struct DeclaredMoments {
  std::optional<double> mean;
  std::optional<double> variance;
  std::optional<double> abs_third;
  // theta -> max(E e^{theta J}, E e^{-theta J}); may return +inf.
  std::function<double(double)> mgf_max;
  // eps -> E e^{eps |J|}; may return +inf.
  std::function<double(double)> exp_abs_moment;
};

class DisorderLaw {
 public:
  enum class Kind { StandardGaussian, Rademacher, CenteredExponential, Custom };
  using Sampler = std::function<double(const DrawSource&)>;

  static DisorderLaw gaussian();
  static DisorderLaw rademacher();
  static DisorderLaw centered_exponential();
  static DisorderLaw custom(std::string name, Sampler sampler, DeclaredMoments moments = {});

  // Parses "gaussian", "rademacher", "cexp" or "custom:<path>".
  static DisorderLaw from_spec(const std::string& spec);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_builtin() const { return kind_ != Kind::Custom; }

  double sample(const DrawSource& src) const;

  std::optional<double> mean() const;
  std::optional<double> variance() const;
  std::optional<double> abs_third_moment() const;
  std::optional<double> mgf_max(double theta) const;
  std::optional<double> exp_abs_moment(double eps) const;

 private:
  DisorderLaw(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  Sampler sampler_;
  DeclaredMoments declared_;
};

// E|Z|^3 for a standard Gaussian Z.
double gaussian_abs_third_moment();

class DisorderMatrix {
 public:
  DisorderMatrix(DisorderLaw law, std::size_t n, std::uint64_t seed, std::vector<double> entries);

  std::size_t size() const { return n_; }
  const DisorderLaw& law() const { return law_; }
  std::uint64_t seed() const { return seed_; }

  double entry(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  std::span<const double> entries() const { return entries_; }

  // out = (beta / sqrt(N)) J x, fixed summation order.
  void apply_scaled(double beta, std::span<const double> x, std::span<double> out) const;
  // out = (beta / sqrt(N)) J^T x
  void apply_scaled_transpose(double beta, std::span<const double> x, std::span<double> out) const;

 private:
  DisorderLaw law_;
  std::size_t n_;
  std::uint64_t seed_;
  std::vector<double> entries_;
};

// Entry (i, j) depends only on (law, seed, i, j).
DisorderMatrix sample_matrix(const DisorderLaw& law, std::size_t n, std::uint64_t seed, std::size_t threads = 1);

struct NormEstimate {
  double value = 0.0;           // ||A||_{2->2}, a lower bound by construction
  double residual = 0.0;        // ||M v - lambda v|| for M = A^T A
  double upper_estimate = 0.0;  // sqrt(lambda + residual)
  std::size_t iterations = 0;
  bool restarted = false;
};

class NormConvergenceError : public NumericalError {
 public:
  NormConvergenceError(const std::string& what, NormEstimate best) : NumericalError(what), best_(best) {}
  const NormEstimate& best() const { return best_; }

 private:
  NormEstimate best_;
};

// ||A||_{2->2} for A = (beta/sqrt(N)) J by power iteration on A^T A.
NormEstimate operator_norm(const DisorderMatrix& mat, double beta, double tol, std::size_t max_iterations = 200000);

enum class Verdict { Pass, Fail, Trend, Unavailable };
const char* to_string(Verdict v);

struct ValidationRow {
  std::string check;
  Verdict verdict = Verdict::Unavailable;
  double value = 0.0;
  double reference = 0.0;
  std::string detail;
};

struct LawValidation {
  std::string law;
  bool pass = false;
  bool empirical_only = false;
  std::vector<ValidationRow> rows;
};

// Zero mean, unit variance and exponential tail checks. Built-in laws are
// checked analytically; custom laws use declared moments (cross-checked
// against draws) or purely empirical batches of `draws` samples.
LawValidation validate_law(const DisorderLaw& law, std::uint64_t seed = 0x5eed, std::size_t draws = 1000000);

struct ConditionDiagnostics {
  // sup over theta in (0, eps] of log(max mgf)/theta^2, on a 64-point grid.
  std::optional<double> mgf_growth;
  // n^{-gamma} sum_{i,j} E|J_ij|^3 = n^{2-gamma} E|J|^3
  std::optional<double> third_moment_sum;
  // N^{-1/2} ||J||_{2->2} per supplied seed
  std::vector<double> scaled_norms;
};

ConditionDiagnostics condition_diagnostics(const DisorderLaw& law, std::size_t n, double gamma, double eps,
                                           std::span<const std::uint64_t> norm_seeds = {}, std::size_t threads = 1);

}  // namespace spinlab
