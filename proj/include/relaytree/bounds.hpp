#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "relaytree/error.hpp"
#include "relaytree/fit.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

namespace relaytree {

// All bounds are on log P_N^{-1} and use base-2 logarithms unless a
// different base is passed explicitly.

namespace detail {

inline std::uint32_t tree_height(std::uint64_t n_sensors) {
  if (n_sensors == 0 || !std::has_single_bit(n_sensors)) {
    throw InvalidArgument("sensor count must be a power of two, got " + std::to_string(n_sensors));
  }
  return static_cast<std::uint32_t>(std::countr_zero(n_sensors));
}

template <std::floating_point Real>
Real log_in_base(Real x, Real base) {
  return base == Real(2) ? std::log2(x) : std::log(x) / std::log(base);
}

template <std::floating_point Real>
void require_open_unit(Real x, const char* name) {
  if (!(x > Real(0) && x < Real(1))) throw InvalidArgument(std::string(name) + " must lie in (0, 1)");
}

}  // namespace detail

enum class Parity { Even, Odd };

constexpr std::string_view to_string(Parity p) { return p == Parity::Even ? "even" : "odd"; }

/// Smallest C with q_k <= C * L_k for every k < up_to (all levels by default).
template <std::floating_point Real>
Real estimate_c(const Trajectory<Real>& traj, std::optional<std::size_t> up_to = std::nullopt) {
  const std::size_t end = std::min(up_to.value_or(traj.levels.size()), traj.levels.size());
  if (end == 0) throw InvalidArgument("estimate_c needs at least one level");
  Real c = 0;
  for (std::size_t k = 0; k < end; ++k) {
    const auto& lv = traj.levels[k];
    if (!(lv.total > Real(0))) {
      throw DomainError("L_" + std::to_string(k) + " = 0; no finite C satisfies q_k <= C L_k");
    }
    c = std::max(c, lv.state.q / lv.total);
  }
  return c;
}

/// sqrt(N) * (log L0^{-1} + 1).
template <std::floating_point Real>
Real theorem1_upper(Real l0, std::uint64_t n_sensors, Real base = Real(2)) {
  detail::require_open_unit(l0, "L0");
  detail::tree_height(n_sensors);
  return std::sqrt(static_cast<Real>(n_sensors)) * (detail::log_in_base(Real(1) / l0, base) + detail::log_in_base(Real(2), base));
}

template <std::floating_point Real>
struct Sandwich {
  Real lower = 0;
  Real upper = 0;
  bool vacuous = false;  // lower <= 0 says nothing about a positive quantity
  Parity parity = Parity::Even;

  bool contains(Real value, Real tolerance = Real(0)) const {
    return value <= upper + tolerance && (vacuous || value >= lower - tolerance);
  }
};

/// Two-sided bounds on log P_N^{-1} for equal priors. Even height uses
/// sqrt(N) on both sides; odd height uses sqrt(N/2) below and sqrt(2N) above.
/// A negative lower bound is returned unchanged and flagged vacuous.
template <std::floating_point Real>
Sandwich<Real> theorem23_bounds(Real l0, Real c_constant, std::uint64_t n_sensors, Real base = Real(2)) {
  detail::require_open_unit(l0, "L0");
  if (!(c_constant >= Real(0)) || !std::isfinite(c_constant)) throw InvalidArgument("C must be finite and >= 0");
  const auto height = detail::tree_height(n_sensors);
  const Real n = static_cast<Real>(n_sensors);
  const Real log_inv_l0 = detail::log_in_base(Real(1) / l0, base);
  const Real lower_core = log_inv_l0 - detail::log_in_base(Real(6) * c_constant + Real(2), base);
  const Real upper_core = log_inv_l0 + detail::log_in_base(Real(2), base);

  Sandwich<Real> s;
  if (height % 2 == 0) {
    s.parity = Parity::Even;
    s.lower = std::sqrt(n) * lower_core;
    s.upper = std::sqrt(n) * upper_core;
  } else {
    s.parity = Parity::Odd;
    s.lower = std::sqrt(n / Real(2)) * lower_core;
    s.upper = std::sqrt(Real(2) * n) * upper_core;
  }
  s.vacuous = s.lower <= Real(0);
  return s;
}

/// Bounds on log Phat_N^{-1} for unequal priors: the equal-prior sandwich
/// shifted by log P(H1)^{-1} below and log P(H0)^{-1} above, where the
/// labels are swapped if needed so that P(H0) <= P(H1). Tiny priors give
/// large upper bounds; nothing is clamped.
template <std::floating_point Real>
Sandwich<Real> theorem4_bounds(Real l0, Real c_constant, std::uint64_t n_sensors, Real prior0, Real base = Real(2)) {
  detail::require_open_unit(prior0, "prior P(H0)");
  const Real smaller = std::min(prior0, Real(1) - prior0);
  const Real larger = std::max(prior0, Real(1) - prior0);
  auto s = theorem23_bounds(l0, c_constant, n_sensors, base);
  s.lower += detail::log_in_base(Real(1) / larger, base);
  s.upper += detail::log_in_base(Real(1) / smaller, base);
  s.vacuous = s.lower <= Real(0);
  return s;
}

/// Everything known about log2 P_N^{-1} for one tree size.
template <std::floating_point Real = long double>
struct BoundsReport {
  std::uint64_t n_sensors = 0;
  std::uint32_t height = 0;
  Parity parity = Parity::Even;
  Real l0 = 0;
  Real c_constant = 0;
  Real lower_bits = 0;  // equal priors
  Real upper_bits = 0;
  bool lower_vacuous = false;
  Real parity_free_upper_bits = 0;
  Real prior0 = 0.5;
  Real prior1 = 0.5;
  Real weighted_lower_bits = 0;  // prior-weighted
  Real weighted_upper_bits = 0;
  bool weighted_lower_vacuous = false;
  Real measured_bits = 0;           // log2 P_N^{-1} from the recursion
  Real measured_weighted_bits = 0;  // log2 Phat_N^{-1}
};

/// Bounds for a tree of `n_sensors` sensors evaluated on `traj` (whose
/// height must be at least log2 N). C defaults to max q_k/L_k over k < log2 N.
template <std::floating_point Real>
BoundsReport<Real> make_bounds_report(const Trajectory<Real>& traj, std::uint64_t n_sensors, Real prior0,
                                      std::optional<Real> c_override = std::nullopt) {
  const auto height = detail::tree_height(n_sensors);
  if (traj.height() < height) throw InvalidArgument("trajectory is shorter than log2 N");
  BoundsReport<Real> r;
  r.n_sensors = n_sensors;
  r.height = height;
  r.l0 = traj[0].total;
  r.c_constant = c_override ? *c_override : estimate_c(traj, std::max<std::size_t>(height, 1));
  const auto eq = theorem23_bounds(r.l0, r.c_constant, n_sensors);
  r.parity = eq.parity;
  r.lower_bits = eq.lower;
  r.upper_bits = eq.upper;
  r.lower_vacuous = eq.vacuous;
  r.parity_free_upper_bits = theorem1_upper(r.l0, n_sensors);
  r.prior0 = prior0;
  r.prior1 = Real(1) - prior0;
  const auto weighted = theorem4_bounds(r.l0, r.c_constant, n_sensors, prior0);
  r.weighted_lower_bits = weighted.lower;
  r.weighted_upper_bits = weighted.upper;
  r.weighted_lower_vacuous = weighted.vacuous;
  const auto& root = traj[height];
  r.measured_bits = -std::log2(root.total);
  r.measured_weighted_bits = -std::log2(weighted_error(root.state, prior0));
  return r;
}

template <std::floating_point Real = long double>
struct StepRatioEntry {
  std::size_t k = 0;
  Real one_step = 0;      // L_{k+1} / L_k^2
  Real shrink = 0;        // L_{k+1} / L_k
  std::optional<Real> two_step;  // L_{k+2} / L_k^2
  bool one_step_ok = true;       // L_{k+1} >= L_k^2
  bool shrink_ok = true;         // L_{k+1} <= L_k
  bool two_step_applicable = false;  // state in R and q non-increasing over k..k+2
  bool two_step_ok = true;           // 1/2 <= ratio <= 6C + 2 where applicable
  bool smaller_q_ok = true;          // re-fusing with a smaller q never raises L_{k+1}
};

template <std::floating_point Real = long double>
struct StepRatioReport {
  Real c_constant = 0;
  Real two_step_upper = 2;  // 6C + 2
  std::vector<StepRatioEntry<Real>> entries;

  bool ok() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) {
      return e.one_step_ok && e.shrink_ok && e.two_step_ok && e.smaller_q_ok;
    });
  }
};

namespace detail {

// a / b^2 through logarithms; L_k^2 underflows long before L_{k+2} does.
template <std::floating_point Real>
Real ratio_over_square(Real a, Real b) {
  return std::exp2(std::log2(a) - Real(2) * std::log2(b));
}

// Re-fuse t with a smaller silence probability and compare L_{k+1}.
// Equality is required on the diagonal; off the diagonal the step must be
// strictly smaller whenever the analytic gap is resolvable.
template <std::floating_point Real>
bool smaller_q_never_raises(const ErrorTriplet<Real>& t, Real tolerance) {
  if (t.q == Real(0)) return true;
  const Real reference = total_error(fuse_step(t, Real(0)));
  for (const Real q_small : {Real(0), t.q / Real(2)}) {
    const Real reduced = total_error(fuse_step(ErrorTriplet<Real>{t.alpha, t.beta, q_small}, Real(0)));
    if (reduced > reference * (Real(1) + tolerance)) return false;
    if (t.alpha == t.beta) {
      if (std::fabs(reduced - reference) > tolerance * reference) return false;
    } else {
      const Real pi_small = (Real(1) - q_small) / (Real(1) + q_small);
      const Real pi_ref = (Real(1) - t.q) / (Real(1) + t.q);
      const Real gap = (pi_small - pi_ref) * std::fabs(t.beta - t.alpha) * (Real(1) - total_error(t));
      const Real resolution = Real(64) * std::numeric_limits<Real>::epsilon() * reference;
      if (gap > resolution && !(reduced < reference)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Checks the step-wise inequalities along a trajectory:
///   L_{k+1} >= L_k^2 and L_{k+1} <= L_k at every level,
///   1/2 <= L_{k+2}/L_k^2 <= 6C + 2 wherever the state is in R and q is
///   non-increasing over the two steps,
///   smaller silence probability never yields a larger L_{k+1}.
/// All comparisons allow `tolerance` (absolute on the two-step ratio,
/// relative on the one-step ratios).
template <std::floating_point Real>
StepRatioReport<Real> check_step_ratios(const Trajectory<Real>& traj, Real c_constant, Real tolerance = Real(1e-12)) {
  StepRatioReport<Real> report;
  report.c_constant = c_constant;
  report.two_step_upper = Real(6) * c_constant + Real(2);
  const auto& lv = traj.levels;
  for (std::size_t k = 0; k + 1 < lv.size(); ++k) {
    StepRatioEntry<Real> e;
    e.k = k;
    const Real lk = lv[k].total;
    const Real next = lv[k + 1].total;
    e.one_step = detail::ratio_over_square(next, lk);
    e.shrink = next / lk;
    e.one_step_ok = e.one_step >= Real(1) - tolerance;
    e.shrink_ok = e.shrink <= Real(1) + tolerance;
    e.smaller_q_ok = detail::smaller_q_never_raises(lv[k].state, tolerance);
    if (k + 2 < lv.size()) {
      e.two_step = detail::ratio_over_square(lv[k + 2].total, lk);
      e.two_step_applicable = in_invariant_region(classify(lv[k].state, tolerance)) &&
                              lv[k + 1].state.q <= lv[k].state.q && lv[k + 2].state.q <= lv[k + 1].state.q;
      if (e.two_step_applicable) {
        e.two_step_ok = *e.two_step >= Real(0.5) - tolerance && *e.two_step <= report.two_step_upper + tolerance;
      }
    }
    report.entries.push_back(e);
  }
  return report;
}

/// Smallest power of 4 (so the tree height is even) with
/// N >= (log eps^{-1} / (log L0^{-1} - log(6C + 2)))^2.
template <std::floating_point Real>
std::uint64_t required_sensors(Real epsilon, Real l0, Real c_constant) {
  detail::require_open_unit(epsilon, "epsilon");
  detail::require_open_unit(l0, "L0");
  if (!(c_constant >= Real(0)) || !std::isfinite(c_constant)) throw InvalidArgument("C must be finite and >= 0");
  const Real denominator = std::log2(Real(1) / l0) - std::log2(Real(6) * c_constant + Real(2));
  if (!(denominator > Real(0))) {
    throw DomainError("bound inapplicable for this C: log L0^{-1} <= log(6C + 2)");
  }
  const Real root = std::log2(Real(1) / epsilon) / denominator;
  const Real needed = root * root;
  // Relative slack absorbs rounding when the right-hand side is an exact power of 4.
  const Real target = needed * (Real(1) - Real(1e-12));
  std::uint64_t n = 1;
  while (static_cast<Real>(n) < target) {
    if (n > (std::uint64_t{1} << 60)) throw DomainError("required sensor count exceeds 2^62");
    n *= 4;
  }
  return n;
}

enum class DecayVerdict { Sufficient, Insufficient, Indeterminate };

constexpr std::string_view to_string(DecayVerdict v) {
  switch (v) {
    case DecayVerdict::Sufficient: return "sufficient";
    case DecayVerdict::Insufficient: return "insufficient";
    case DecayVerdict::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

struct DecayReport {
  DecayVerdict verdict = DecayVerdict::Indeterminate;
  std::size_t first_level = 0;
  std::vector<long double> r;  // log2(p_k^{-1}) / 2^{k/2} for k = first_level..horizon
  long double min_r = 0;
  double trend_slope = 0;      // least-squares slope of log2 r_k against k
  bool trending_to_zero = false;
  double threshold = 0.05;
};

/// Finite-horizon surrogate for "log p_k^{-1} grows at least like 2^{k/2}".
///
/// r_k = log2(p_k^{-1}) / 2^{k/2} over the last half of the horizon.
/// Sufficient: min r_k >= threshold and log2 r_k is not falling by 1/4 or
/// more per level. Insufficient: the last r_k is below the threshold and
/// r_k is non-increasing or falling. Anything else is indeterminate.
/// The verdict is a surrogate for an asymptotic statement.
inline DecayReport decay_profile(const FailureSchedule& schedule, std::size_t horizon, double threshold = 0.05) {
  if (horizon < 8) throw InvalidArgument("decay classification needs a horizon of at least 8 levels");
  if (!schedule.covers(horizon)) throw InvalidArgument("schedule does not cover the requested horizon");
  if (!schedule.non_increasing(horizon)) throw InvalidArgument("decay classification needs a non-increasing schedule");

  DecayReport rep;
  rep.threshold = threshold;
  rep.first_level = (horizon + 1) / 2;
  for (std::size_t k = rep.first_level; k <= horizon; ++k) {
    const long double scale = std::exp2(static_cast<long double>(k) / 2.0L);
    rep.r.push_back(-schedule.log2_p(k) / scale);
  }
  rep.min_r = *std::min_element(rep.r.begin(), rep.r.end());

  bool non_increasing = true;
  for (std::size_t i = 1; i < rep.r.size(); ++i) non_increasing = non_increasing && rep.r[i] <= rep.r[i - 1];

  const bool any_zero = std::any_of(rep.r.begin(), rep.r.end(), [](long double v) { return v <= 0.0L; });
  const bool all_finite = std::all_of(rep.r.begin(), rep.r.end(), [](long double v) { return std::isfinite(v); });
  if (any_zero) {
    rep.trending_to_zero = true;
  } else if (all_finite) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < rep.r.size(); ++i) {
      xs.push_back(static_cast<double>(rep.first_level + i));
      ys.push_back(static_cast<double>(std::log2(rep.r[i])));
    }
    rep.trend_slope = fit_line(xs, ys).slope;
    rep.trending_to_zero = rep.trend_slope <= -0.25;
  }
  // Infinite r_k means p_k = 0 from some level on: not trending to zero.

  const long double last = rep.r.back();
  if (rep.min_r >= threshold && !rep.trending_to_zero) {
    rep.verdict = DecayVerdict::Sufficient;
  } else if (last < threshold && (non_increasing || rep.trending_to_zero)) {
    rep.verdict = DecayVerdict::Insufficient;
  } else {
    rep.verdict = DecayVerdict::Indeterminate;
  }
  return rep;
}

inline DecayVerdict classify_decay(const FailureSchedule& schedule, std::size_t horizon, double threshold = 0.05) {
  return decay_profile(schedule, horizon, threshold).verdict;
}

}  // namespace relaytree
