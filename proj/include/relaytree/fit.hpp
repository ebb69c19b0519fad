#pragma once

#include <cstddef>
#include <span>

#include "relaytree/error.hpp"

namespace relaytree {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("fit_line: x and y lengths differ");
  if (xs.size() < 2) throw InvalidArgument("fit_line: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
    sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_line: all x values coincide");
  const double slope = sxy / sxx;
  return {slope, mean_y - slope * mean_x};
}

}  // namespace relaytree
