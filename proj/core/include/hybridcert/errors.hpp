#pragma once

#include <stdexcept>
#include <string>

namespace hybridcert {

// Invalid arguments or violated preconditions. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Runtime numeric failures: lost brackets, non-convergence, non-finite
// intermediate values. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quantile requested at p in {0, 1}, where the normal quantile is unbounded.
class UnboundedQuantileError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Bisection bracket does not straddle the target, even after geometric
// expansion.
class BracketError : public NumericError {
 public:
  using NumericError::NumericError;
};

// p_A does not exceed the clean mass at likelihood ratio zero. The
// Neyman-Pearson optimum is exactly zero and no finite threshold exists.
class DegenerateCertificateError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

}  // namespace hybridcert
