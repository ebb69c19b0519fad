#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relaytree/error.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/schedule.hpp"

namespace relaytree {

template <std::floating_point Real = long double>
struct Level {
  std::size_t k = 0;
  ErrorTriplet<Real> state;
  Real total = 0;       // L_k = alpha_k + beta_k
  Real half_total = 0;  // L_k / 2, the total error probability under equal priors
  Real starvation = 0;  // P_k, probability a level-k node hears neither child
  RegionLabel region = RegionLabel::Invalid;
};

/// Per-level evolution of the error triplet from the sensors (k = 0) up to
/// the fusion center (k = height).
template <std::floating_point Real = long double>
struct Trajectory {
  std::vector<Level<Real>> levels;
  FailureSchedule schedule = FailureSchedule::none();

  std::size_t height() const { return levels.empty() ? 0 : levels.size() - 1; }
  const Level<Real>& root() const { return levels.back(); }
  const Level<Real>& operator[](std::size_t k) const { return levels[k]; }
};

/// Sensor-level triplet; the sensors' silence probability is q_0 = p_0.
template <std::floating_point Real = long double>
ErrorTriplet<Real> initial_triplet(Real alpha0, Real beta0, const FailureSchedule& schedule) {
  ErrorTriplet<Real> t{alpha0, beta0, static_cast<Real>(schedule.p(0))};
  detail::require_valid(t);
  return t;
}

template <std::floating_point Real = long double>
Trajectory<Real> evolve(Real alpha0, Real beta0, const FailureSchedule& schedule, std::size_t height) {
  if (!schedule.covers(height)) {
    throw InvalidArgument("schedule covers levels 0.." + std::to_string(*schedule.last_level()) +
                          " but height " + std::to_string(height) + " needs p_0..p_" + std::to_string(height));
  }
  Trajectory<Real> traj;
  traj.schedule = schedule;
  traj.levels.reserve(height + 1);

  auto record = [&traj](std::size_t k, const ErrorTriplet<Real>& t, Real starvation) {
    const Real total = total_error(t);
    traj.levels.push_back({k, t, total, total / Real(2), starvation, classify(t)});
  };

  ErrorTriplet<Real> t = initial_triplet(alpha0, beta0, schedule);
  record(0, t, Real(0));
  for (std::size_t k = 0; k < height; ++k) {
    const Real starvation = t.q * t.q;
    t = fuse_step(t, static_cast<Real>(schedule.p(k + 1)));
    record(k + 1, t, starvation);
  }
  return traj;
}

template <std::floating_point Real = long double>
struct InvarianceReport {
  std::vector<RegionLabel> labels;
  std::optional<std::size_t> entry_level;  // first level inside R
  std::vector<std::size_t> exits;          // levels outside R after entry
  std::vector<std::size_t> q_increases;    // levels k with q_{k+1} > q_k
  bool hypothesis_met = false;             // p non-increasing and q_1 <= q_0

  bool ok() const { return exits.empty(); }
};

/// Replays a trajectory and flags every exit from R = R_U u R_L after the
/// first entry. When the schedule does not satisfy the monotonicity
/// hypothesis the replay still runs; `hypothesis_met` records it.
template <std::floating_point Real = long double>
InvarianceReport<Real> verify_invariance(const Trajectory<Real>& traj, Real tolerance = Real(0)) {
  InvarianceReport<Real> report;
  const auto& lv = traj.levels;
  report.hypothesis_met =
      traj.schedule.non_increasing(traj.height()) && (lv.size() < 2 || lv[1].state.q <= lv[0].state.q);
  for (std::size_t k = 0; k < lv.size(); ++k) {
    const RegionLabel label = classify(lv[k].state, tolerance);
    report.labels.push_back(label);
    const bool inside = in_invariant_region(label);
    if (inside && !report.entry_level) report.entry_level = k;
    if (!inside && report.entry_level) report.exits.push_back(k);
    if (k + 1 < lv.size() && lv[k + 1].state.q > lv[k].state.q + tolerance) report.q_increases.push_back(k);
  }
  return report;
}

template <std::floating_point Real = long double>
InvarianceReport<Real> verify_invariance(Real alpha0, Real beta0, const FailureSchedule& schedule,
                                         std::size_t height, Real tolerance = Real(0)) {
  return verify_invariance(evolve(alpha0, beta0, schedule, height), tolerance);
}

}  // namespace relaytree
