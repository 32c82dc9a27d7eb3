#pragma once

#include <stdexcept>
#include <string>

namespace coverage_inekf {

/// Bad user input: malformed config, unreadable CSV, invalid parameters.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: loss of positive definiteness, singular innovation, divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coverage_inekf
