#pragma once

#include <cmath>
#include <concepts>
#include <string_view>

#include "relaytree/error.hpp"
#include "relaytree/fusion.hpp"

namespace relaytree {

// The (alpha, beta, q) prism splits along the diagonal into an upper half U
// (beta >= alpha) and a lower half L (beta < alpha). Inside U:
//   B   - points that the next fusion step throws across the diagonal,
//   R_U - B plus the band the trajectory can occupy after a flip back.
// R_L is R_U reflected into L, and R = R_U u R_L is invariant once the
// silence probabilities stop increasing.

enum class RegionLabel {
  UpperOutsideB,  // U \ R_U
  B,              // B (diagonal included)
  UpperRMinusB,   // R_U \ B
  LowerR,         // R_L
  LowerOutsideR,  // L \ R_L
  Invalid,        // alpha + beta >= 1, negative entries, or q outside [0, 1)
};

constexpr std::string_view to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::UpperOutsideB: return "U-outside-B";
    case RegionLabel::B: return "B";
    case RegionLabel::UpperRMinusB: return "R_U-minus-B";
    case RegionLabel::LowerR: return "R_L";
    case RegionLabel::LowerOutsideR: return "L-outside-R_L";
    case RegionLabel::Invalid: return "invalid";
  }
  return "invalid";
}

constexpr bool in_invariant_region(RegionLabel label) {
  return label == RegionLabel::B || label == RegionLabel::UpperRMinusB || label == RegionLabel::LowerR;
}

namespace detail {

template <std::floating_point Real>
void require_boundary_domain(Real alpha, Real q) {
  if (!(alpha >= Real(0) && alpha < Real(1))) throw InvalidArgument("alpha must lie in [0, 1)");
  if (!(q >= Real(0) && q < Real(1))) throw InvalidArgument("q must lie in [0, 1); the q = 1 face is degenerate");
}

}  // namespace detail

/// beta on the upper boundary of B at (alpha, q): the largest beta whose
/// next fused pair satisfies beta' <= alpha'. Reduces to sqrt(2a - a^2) at q = 0.
template <std::floating_point Real>
Real b_upper_boundary(Real alpha, Real q) {
  detail::require_boundary_domain(alpha, q);
  const Real one_minus_q = Real(1) - q;
  const Real radicand =
      q * q + one_minus_q * one_minus_q * (Real(2) * alpha - alpha * alpha) + Real(2) * q * one_minus_q * alpha;
  return (std::sqrt(radicand) - q) / one_minus_q;
}

/// beta on the upper boundary of R_U at (alpha, q). Reduces to
/// 2 sqrt(alpha) - alpha at q = 0.
template <std::floating_point Real>
Real ru_upper_boundary(Real alpha, Real q) {
  detail::require_boundary_domain(alpha, q);
  const Real radicand = q * q + (Real(1) - q * q) * alpha;
  return -alpha + Real(2) * (std::sqrt(radicand) - q) / (Real(1) - q);
}

/// Region of a triplet. Points below the diagonal are mirrored and tested
/// against R_U. Upper boundaries are closed; `tolerance` widens them.
template <std::floating_point Real>
RegionLabel classify(const ErrorTriplet<Real>& t, Real tolerance = Real(0)) {
  if (!t.valid()) return RegionLabel::Invalid;
  if (t.beta >= t.alpha) {
    if (t.beta <= b_upper_boundary(t.alpha, t.q) + tolerance) return RegionLabel::B;
    if (t.beta <= ru_upper_boundary(t.alpha, t.q) + tolerance) return RegionLabel::UpperRMinusB;
    return RegionLabel::UpperOutsideB;
  }
  const auto m = t.mirrored();
  return m.beta <= ru_upper_boundary(m.alpha, m.q) + tolerance ? RegionLabel::LowerR : RegionLabel::LowerOutsideR;
}

/// Whether one fusion step moves a point of U onto or across the diagonal
/// (beta' <= alpha'). Landing exactly on the diagonal counts as a flip.
template <std::floating_point Real>
bool check_flip(const ErrorTriplet<Real>& t, Real p_next) {
  if (!t.valid() || t.beta < t.alpha) throw InvalidArgument("check_flip expects a triplet in U (beta >= alpha)");
  const auto next = fuse_step(t, p_next);
  return next.beta <= next.alpha;
}

}  // namespace relaytree
