#pragma once

#include <concepts>
#include <string>

#include "relaytree/error.hpp"

namespace relaytree {

/// State of one tree level: Type I error (false alarm), Type II error
/// (missed detection) and the probability that a node's message never
/// reaches its parent. The error probabilities are conditional on the node
/// having data to send.
template <std::floating_point Real = long double>
struct ErrorTriplet {
  Real alpha{};
  Real beta{};
  Real q{};

  /// alpha, beta >= 0, alpha + beta < 1, 0 <= q < 1.
  constexpr bool valid() const {
    return alpha >= Real(0) && beta >= Real(0) && alpha + beta < Real(1) && q >= Real(0) && q < Real(1);
  }

  /// Same triplet reflected across the diagonal beta = alpha.
  constexpr ErrorTriplet mirrored() const { return {beta, alpha, q}; }

  friend constexpr bool operator==(const ErrorTriplet&, const ErrorTriplet&) = default;
};

/// Two-input fusion performed by the unit-threshold likelihood-ratio test.
/// Or: decide H1 if either child says H1 (used while alpha <= beta).
/// And: decide H1 only if both children say H1.
enum class FusionRule { Or, And };

template <std::floating_point Real>
constexpr FusionRule fusion_rule_for(Real alpha, Real beta) {
  return alpha <= beta ? FusionRule::Or : FusionRule::And;
}

namespace detail {

template <std::floating_point Real>
void require_valid(const ErrorTriplet<Real>& t) {
  if (!t.valid()) {
    throw InvalidArgument("error triplet outside alpha,beta >= 0, alpha+beta < 1, 0 <= q < 1: (" +
                          std::to_string(static_cast<double>(t.alpha)) + ", " +
                          std::to_string(static_cast<double>(t.beta)) + ", " +
                          std::to_string(static_cast<double>(t.q)) + ")");
  }
}

}  // namespace detail

/// Silence probability one level up: q^2 + (1 - q^2) * p_next.
template <std::floating_point Real>
Real silence_step(Real q, Real p_next) {
  if (!(q >= Real(0) && q < Real(1))) throw InvalidArgument("silence probability must lie in [0, 1)");
  detail::require_probability(p_next, "local failure probability");
  const Real q2 = q * q;
  return q2 + (Real(1) - q2) * p_next;
}

/// One level of the expected-error recursion. The error pair is averaged
/// over the "one child heard" and "both children heard" cases, weighted by
/// 2q/(1+q) and (1-q)/(1+q). Ties alpha == beta take the Or branch.
///
/// Throws DomainError if the new silence probability reaches 1, which
/// happens exactly when p_next == 1.
template <std::floating_point Real>
ErrorTriplet<Real> fuse_step(const ErrorTriplet<Real>& t, Real p_next) {
  detail::require_valid(t);
  const Real q = t.q;
  const Real keep = (Real(1) - q) / (Real(1) + q);
  const Real forward = Real(2) * q / (Real(1) + q);

  ErrorTriplet<Real> next;
  if (t.alpha <= t.beta) {
    next.alpha = keep * (Real(2) * t.alpha - t.alpha * t.alpha) + forward * t.alpha;
    next.beta = keep * t.beta * t.beta + forward * t.beta;
  } else {
    next.alpha = keep * t.alpha * t.alpha + forward * t.alpha;
    next.beta = keep * (Real(2) * t.beta - t.beta * t.beta) + forward * t.beta;
  }
  next.q = silence_step(q, p_next);
  if (!(next.q < Real(1))) {
    throw DomainError("silence probability reached 1 (every message lost); the recursion is undefined there");
  }
  return next;
}

/// L = alpha + beta, i.e. twice the total error probability under equal priors.
template <std::floating_point Real>
constexpr Real total_error(const ErrorTriplet<Real>& t) {
  return t.alpha + t.beta;
}

/// Prior-weighted total error prior0 * alpha + (1 - prior0) * beta.
template <std::floating_point Real>
Real weighted_error(const ErrorTriplet<Real>& t, Real prior0) {
  if (!(prior0 > Real(0) && prior0 < Real(1))) throw InvalidArgument("prior P(H0) must lie in (0, 1)");
  return prior0 * t.alpha + (Real(1) - prior0) * t.beta;
}

}  // namespace relaytree
