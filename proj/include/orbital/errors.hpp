#pragma once

#include <stdexcept>
#include <string>

namespace orbital {

/// Unsupported family/rank combination or an otherwise unusable configuration.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or coordinate-system mismatch between arguments.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies on (or too close to) a root hyperplane.
class DegenerateInputError : public std::domain_error {
 public:
  DegenerateInputError(const std::string& what, std::string root)
      : std::domain_error(what), root_(std::move(root)) {}

  /// Human-readable name of the vanishing root, e.g. "e1 - e2".
  const std::string& root() const noexcept { return root_; }

 private:
  std::string root_;
};

/// A computation exceeded its safety bound.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ill-conditioned or otherwise untrustworthy numerical result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature did not reach its tolerance.
class ResolutionError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace orbital
