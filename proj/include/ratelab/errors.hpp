#pragma once

#include <stdexcept>
#include <string>

namespace ratelab {

/// Base of every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
 public:
  using error::error;
};

/// Invalid model, filter or rule parameter.
class parameter_error : public error {
 public:
  using error::error;
};

/// Caller broke an operation's precondition (e.g. non-monotone map).
class contract_error : public error {
 public:
  using error::error;
};

/// Bracket expansion hit the floating-point floor.
class underflow_error : public error {
 public:
  using error::error;
};

class construction_error : public error {
 public:
  using error::error;
};

/// Source coefficients exceed the source-condition radius.
class source_violation_error : public error {
 public:
  using error::error;
};

/// Non-finite or malformed input data.
class data_error : public error {
 public:
  using error::error;
};

class numerical_error : public error {
 public:
  using error::error;
};

/// Exact basis-projection norms need a Mercer-truncated kernel.
class unsupported_norm_error : public error {
 public:
  using error::error;
};

class truncation_error : public error {
 public:
  using error::error;
};

class packing_failure_error : public error {
 public:
  using error::error;
};

/// Closed-form parameter rule requested for a non-Hölder index function.
class rule_mismatch_error : public error {
 public:
  using error::error;
};

/// Two-point amplitude too small for the supplied function value.
class amplitude_error : public error {
 public:
  using error::error;
};

class config_error : public error {
 public:
  using error::error;
};

}  // namespace ratelab
