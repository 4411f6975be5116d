#pragma once

#include <stdexcept>
#include <string>

namespace fbbai {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (budget too small for the schedule, bad eta,
// unknown family or variant). The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input that admits no meaningful answer: all-zero feature matrix, no unique
// best arm, malformed CSV.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// V_t = sum X_j X_j^T is singular or numerically ill-conditioned.
class InvalidAllocation : public Error {
 public:
  using Error::Error;
};

// Design information matrix V(pi) is singular.
class SingularDesign : public Error {
 public:
  using Error::Error;
};

// IRLS objective kept increasing after the maximum number of step halvings.
class EstimationFailure : public Error {
 public:
  using Error::Error;
};

// Rounding was asked for fewer pulls than support points.
class BudgetTooSmall : public Error {
 public:
  using Error::Error;
};

}  // namespace fbbai
