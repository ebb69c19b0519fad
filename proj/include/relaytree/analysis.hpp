#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "relaytree/error.hpp"
#include "relaytree/fit.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

namespace relaytree {

// Experiment recipes that produce plot-ready series.

struct ScalingPoint {
  std::size_t height = 0;    // log2 N
  long double p_hat = 0;     // prior-weighted root error
  double log2_log2_inv = 0;  // log2 log2 (1 / p_hat)
};

struct ScalingCurve {
  std::string profile;
  std::vector<ScalingPoint> points;
  double slope = 0;  // least-squares slope of log2 log2 Phat^{-1} against log2 N inside the window
};

/// Root error for every height 1..max_height on one trajectory.
inline ScalingCurve scaling_curve(std::string profile, long double alpha0, long double beta0,
                                  const FailureSchedule& schedule, std::size_t min_height, std::size_t max_height,
                                  long double prior0, std::size_t window_lo, std::size_t window_hi) {
  if (min_height > max_height) throw InvalidArgument("min height exceeds max height");
  if (window_lo >= window_hi) throw InvalidArgument("slope window must span at least two heights");
  const auto traj = evolve(alpha0, beta0, schedule, max_height);
  ScalingCurve curve;
  curve.profile = std::move(profile);
  std::vector<double> xs, ys;
  for (std::size_t h = min_height; h <= max_height; ++h) {
    ScalingPoint pt;
    pt.height = h;
    pt.p_hat = weighted_error(traj[h].state, prior0);
    pt.log2_log2_inv = static_cast<double>(std::log2(-std::log2(pt.p_hat)));
    curve.points.push_back(pt);
    if (h >= window_lo && h <= window_hi) {
      xs.push_back(static_cast<double>(h));
      ys.push_back(pt.log2_log2_inv);
    }
  }
  if (xs.size() < 2) throw InvalidArgument("slope window contains fewer than two computed heights");
  curve.slope = fit_line(xs, ys).slope;
  return curve;
}

struct BoundaryPoint {
  long double q = 0;
  long double alpha = 0;
  long double b_upper = 0;
  long double ru_upper = 0;
};

/// Upper boundaries of B and R_U sampled on alpha = 0, step, 2*step, ... < alpha_max.
inline std::vector<BoundaryPoint> boundary_grid(const std::vector<long double>& qs, long double step,
                                                long double alpha_max = 0.5L) {
  if (!(step > 0.0L)) throw InvalidArgument("grid step must be positive");
  if (!(alpha_max > 0.0L && alpha_max < 1.0L)) throw InvalidArgument("alpha_max must lie in (0, 1)");
  std::vector<BoundaryPoint> out;
  for (const long double q : qs) {
    for (std::size_t i = 0;; ++i) {
      const long double a = static_cast<long double>(i) * step;
      if (a >= alpha_max) break;
      out.push_back({q, a, b_upper_boundary(a, q), ru_upper_boundary(a, q)});
    }
  }
  return out;
}

struct RatioGridPoint {
  long double alpha = 0;
  long double beta = 0;
  long double q = 0;
  RegionLabel region = RegionLabel::Invalid;
  long double two_step = 0;  // L_{k+2} / L_k^2
  long double bound = 0;     // 6C + 2
};

/// Two-step ratio over R_U for fixed alphas: beta sweeps from alpha to the
/// R_U boundary with the largest silence probability allowed by
/// q <= C (alpha + beta), and the intermediate level sees no new failures.
inline std::vector<RatioGridPoint> ratio_grid(const std::vector<long double>& alphas, long double c_constant,
                                              std::size_t points) {
  if (points < 2) throw InvalidArgument("ratio grid needs at least two points per alpha");
  if (!(c_constant >= 0.0L)) throw InvalidArgument("C must be >= 0");
  std::vector<RatioGridPoint> out;
  for (const long double a : alphas) {
    if (!(a > 0.0L && a < 0.5L)) throw InvalidArgument("grid alphas must lie in (0, 0.5)");
    for (std::size_t i = 0; i < points; ++i) {
      // q depends on beta and the boundary depends on q, so bisect on the
      // sweep fraction against the boundary at the point's own q.
      const long double frac = static_cast<long double>(i) / static_cast<long double>(points - 1);
      long double lo = a, hi = 1.0L - a;
      for (int it = 0; it < 200; ++it) {
        const long double mid = 0.5L * (lo + hi);
        const long double qm = std::fmin(c_constant * (a + mid), 0.99L);
        if (mid <= ru_upper_boundary(a, qm)) lo = mid; else hi = mid;
      }
      const long double beta = a + frac * (lo - a);
      const long double q = std::fmin(c_constant * (a + beta), 0.99L);
      if (!(a + beta < 1.0L)) continue;
      const ErrorTriplet<long double> t{a, beta, q};
      const auto t1 = fuse_step(t, 0.0L);
      const auto t2 = fuse_step(t1, 0.0L);
      const long double l0 = total_error(t);
      out.push_back({a, beta, q, classify(t, 1e-12L), total_error(t2) / (l0 * l0), 6.0L * c_constant + 2.0L});
    }
  }
  return out;
}

}  // namespace relaytree
