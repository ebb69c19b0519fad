#pragma once

#include <stdexcept>
#include <string>

namespace relaytree {

/// Raised when a caller hands in a value outside an operation's
/// precondition (probability outside [0, 1], N not a power of two, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when the mathematics itself breaks down for otherwise
/// well-formed input: silence probability reaching 1, a bound whose
/// denominator is non-positive, a zero total error where a ratio is needed.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

namespace detail {

template <typename Real>
inline void require_probability(Real value, const char* name) {
  if (!(value >= Real(0) && value <= Real(1))) {
    throw InvalidArgument(std::string(name) + " must lie in [0, 1], got " +
                          std::to_string(static_cast<double>(value)));
  }
}

}  // namespace detail
}  // namespace relaytree
