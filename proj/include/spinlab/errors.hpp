#pragma once

#include <stdexcept>
#include <string>

namespace spinlab {

// Argument outside the domain of a potential, law or parameter set.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical procedure failed (safeguard, quadrature, non-convergence, certificate).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spinlab
