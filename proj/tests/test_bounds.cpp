#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "relaytree/bounds.hpp"
#include "relaytree/error.hpp"
#include "relaytree/geometry.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

using namespace relaytree;
using T = ErrorTriplet<long double>;

namespace {
double d(long double v) { return static_cast<double>(v); }
}  // namespace

TEST(ParityFreeUpper, Examples) {
  EXPECT_NEAR(d(theorem1_upper(0.5L, 4)), 4.0, 1e-15);
  EXPECT_NEAR(d(theorem1_upper(1.0L - 1e-15L, 64)), 8.0, 1e-9);
  EXPECT_NEAR(d(theorem1_upper(0.3L, 1024)), 32.0 * (std::log2(10.0 / 3.0) + 1.0), 1e-12);
  EXPECT_THROW(theorem1_upper(0.3L, 1000), InvalidArgument);
  EXPECT_THROW(theorem1_upper(0.0L, 4), InvalidArgument);
}

TEST(Sandwich, Examples) {
  const auto even = theorem23_bounds(0.5L, 0.0L, 4);
  EXPECT_EQ(even.parity, Parity::Even);
  EXPECT_NEAR(d(even.lower), 0.0, 1e-15);
  EXPECT_NEAR(d(even.upper), 4.0, 1e-15);
  EXPECT_TRUE(even.vacuous);

  const auto neg = theorem23_bounds(0.3L, 1.0L, 1024);
  EXPECT_NEAR(d(neg.lower), 32.0 * (std::log2(10.0 / 3.0) - 3.0), 1e-12);
  EXPECT_TRUE(neg.vacuous);

  const auto odd = theorem23_bounds(0.5L, 0.0L, 2048);
  EXPECT_EQ(odd.parity, Parity::Odd);
  EXPECT_NEAR(d(odd.lower), 0.0, 1e-12);
  EXPECT_NEAR(d(odd.upper), 128.0, 1e-12);
}

TEST(Sandwich, NonVacuousOrdering) {
  for (long double l0 : {0.01L, 0.05L, 0.1L, 0.2L}) {
    for (long double c : {0.0L, 0.5L, 2.0L}) {
      for (std::uint64_t n : {2ull, 4ull, 8ull, 1024ull, 2048ull}) {
        const auto s = theorem23_bounds(l0, c, n);
        if (!s.vacuous) {
          EXPECT_LE(s.lower, s.upper);
        }
        EXPECT_EQ(s.vacuous, s.lower <= 0.0L);
      }
    }
  }
}

TEST(WeightedSandwich, Examples) {
  const auto half = theorem4_bounds(0.2L, 0.5L, 256, 0.5L);
  const auto eq = theorem23_bounds(0.2L, 0.5L, 256);
  EXPECT_NEAR(d(half.lower), d(eq.lower + 1), 1e-12);
  EXPECT_NEAR(d(half.upper), d(eq.upper + 1), 1e-12);

  const auto w = theorem4_bounds(0.5L, 0.0L, 4, 0.4L);
  EXPECT_NEAR(d(w.lower), std::log2(1 / 0.6), 1e-12);
  EXPECT_NEAR(d(w.upper), 4 + std::log2(1 / 0.4), 1e-12);

  const auto swapped = theorem4_bounds(0.5L, 0.0L, 4, 0.6L);
  EXPECT_NEAR(d(swapped.lower), d(w.lower), 1e-15);
  EXPECT_NEAR(d(swapped.upper), d(w.upper), 1e-15);

  EXPECT_GT(theorem4_bounds(0.5L, 0.0L, 4, 1e-300L).upper, 990.0L);
  EXPECT_THROW(theorem4_bounds(0.5L, 0.0L, 4, 0.0L), InvalidArgument);
}

TEST(Bounds, BaseInvariance) {
  for (long double base : {std::exp(1.0L), 10.0L, 3.0L}) {
    const long double scale = std::log2(base);
    for (std::uint64_t n : {16ull, 32ull}) {
      const auto two = theorem23_bounds(0.05L, 0.3L, n);
      const auto other = theorem23_bounds(0.05L, 0.3L, n, base);
      EXPECT_NEAR(d(two.lower / scale), d(other.lower), 1e-12);
      EXPECT_NEAR(d(two.upper / scale), d(other.upper), 1e-12);
      EXPECT_EQ(two.vacuous, other.vacuous);
      EXPECT_NEAR(d(theorem1_upper(0.05L, n) / scale), d(theorem1_upper(0.05L, n, base)), 1e-12);
      // The measured value rescales the same way, so the verdict is unchanged.
      const long double measured2 = 9.0L, measured_b = measured2 / scale;
      EXPECT_EQ(two.contains(measured2), other.contains(measured_b));
    }
  }
}

TEST(EstimateC, Examples) {
  EXPECT_EQ(estimate_c(evolve(0.1L, 0.2L, FailureSchedule::none(), 20)), 0.0L);

  const auto quad = evolve(0.1L, 0.2L, FailureSchedule::quadratic(0.1L), 20);
  const long double c = estimate_c(quad);
  EXPECT_TRUE(std::isfinite(c));
  EXPECT_LT(quad[20].state.q / quad[20].total, quad[5].state.q / quad[5].total);

  const auto cons = evolve(0.1L, 0.2L, FailureSchedule::constant(0.05L), 20);
  EXPECT_LT(estimate_c(cons, 10), estimate_c(cons, 20));
}

TEST(StepRatios, NonFailureWithinHalfAndTwo) {
  const auto traj = evolve(0.1L, 0.2L, FailureSchedule::none(), 20);
  const auto rep = check_step_ratios(traj, 0.0L);
  EXPECT_TRUE(rep.ok());
  for (const auto& e : rep.entries) {
    if (e.two_step && e.two_step_applicable) {
      EXPECT_GE(*e.two_step, 0.5L - 1e-12L);
      EXPECT_LE(*e.two_step, 2.0L + 1e-12L);
    }
  }
}

TEST(StepRatios, DiagonalKeepsTotal) {
  const auto traj = evolve(0.2L, 0.2L, FailureSchedule::none(), 1);
  EXPECT_EQ(traj[1].total, traj[0].total);
}

TEST(StepRatios, ConstantCBoundOnQuadraticTrajectory) {
  const auto traj = evolve(0.1L, 0.2L, FailureSchedule::quadratic(0.1L), 20);
  const auto rep = check_step_ratios(traj, estimate_c(traj));
  EXPECT_TRUE(rep.ok());
}

TEST(StepRatios, SmallerQNeverRaises) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<long double> u(0.0L, 1.0L);
  for (int i = 0; i < 5000; ++i) {
    const long double a = u(rng) * 0.5L, b = u(rng) * (0.999L - a), q = u(rng) * 0.99L;
    EXPECT_TRUE(detail::smaller_q_never_raises(T{a, b, q}, 1e-12L));
  }
}

TEST(RequiredSensors, Examples) {
  EXPECT_EQ(required_sensors(0.25L, 0.25L, 0.0L), 4u);
  EXPECT_EQ(required_sensors(0.01L, 0.1L, 0.0L), 16u);
  EXPECT_EQ(required_sensors(0.9L, 0.1L, 0.0L), 1u);
  EXPECT_THROW(required_sensors(0.01L, 0.3L, 1.0L), DomainError);
  EXPECT_THROW(required_sensors(0.0L, 0.1L, 0.0L), InvalidArgument);
}

TEST(RequiredSensors, MonotoneInEpsilon) {
  std::uint64_t prev = 1;
  for (long double eps = 0.5L; eps > 1e-30L; eps /= 3) {
    const auto n = required_sensors(eps, 0.1L, 0.1L);
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(RequiredSensors, MeetsTheTargetAtEvenHeight) {
  for (long double eps : {1e-3L, 1e-6L, 1e-12L}) {
    const auto n = required_sensors(eps, 0.1L, 0.2L);
    const auto s = theorem23_bounds(0.1L, 0.2L, n);
    EXPECT_EQ(s.parity, Parity::Even);
    EXPECT_GE(s.lower, std::log2(1 / eps) * (1 - 1e-12L));
  }
}

TEST(Decay, Examples) {
  EXPECT_EQ(classify_decay(FailureSchedule::quadratic(0.1L), 24), DecayVerdict::Sufficient);
  EXPECT_EQ(classify_decay(FailureSchedule::constant(0.1L), 24), DecayVerdict::Insufficient);
  EXPECT_EQ(classify_decay(FailureSchedule::geometric(0.1L, 0.5L), 24), DecayVerdict::Insufficient);
  EXPECT_EQ(classify_decay(FailureSchedule::none(), 24), DecayVerdict::Sufficient);
}

TEST(Decay, BoundaryRateIsSufficient) {
  std::vector<long double> values;
  for (int k = 0; k <= 24; ++k) values.push_back(std::exp2(-std::exp2(k / 2.0L)));
  EXPECT_EQ(classify_decay(FailureSchedule::from_values(values), 24), DecayVerdict::Sufficient);
}

TEST(Decay, SlowerThanBoundaryIsInsufficient) {
  std::vector<long double> values;
  for (int k = 0; k <= 24; ++k) values.push_back(std::exp2(-std::exp2(k / 4.0L)));
  EXPECT_EQ(classify_decay(FailureSchedule::from_values(values), 24), DecayVerdict::Insufficient);
}

TEST(Decay, Preconditions) {
  EXPECT_THROW(classify_decay(FailureSchedule::quadratic(0.1L), 6), InvalidArgument);
  EXPECT_THROW(classify_decay(FailureSchedule::from_values({0.1L, 0.2L, 0.3L, 0.4L, 0.5L, 0.6L, 0.7L, 0.8L, 0.9L}), 8),
               InvalidArgument);
  EXPECT_EQ(to_string(DecayVerdict::Indeterminate), "indeterminate");
}

TEST(BoundsReport, QuadraticTrajectory) {
  const auto traj = evolve(0.1L, 0.2L, FailureSchedule::quadratic(0.1L), 20);
  for (std::uint32_t h = 2; h <= 20; ++h) {
    const auto r = make_bounds_report(traj, std::uint64_t{1} << h, 0.4L);
    EXPECT_EQ(r.parity, h % 2 ? Parity::Odd : Parity::Even);
    EXPECT_LE(r.measured_bits, r.parity_free_upper_bits);
    EXPECT_LE(r.measured_bits, r.upper_bits);
    if (!r.lower_vacuous) {
      EXPECT_GE(r.measured_bits, r.lower_bits);
    }
    EXPECT_LE(r.measured_weighted_bits, r.weighted_upper_bits);
    if (!r.weighted_lower_vacuous) {
      EXPECT_GE(r.measured_weighted_bits, r.weighted_lower_bits);
    }
  }
}

// A start on the upper edge of B with a tiny alpha flips to the other side
// after one step and loses more than the parity-free bound allows at odd
// heights. Even heights stay inside it.
TEST(BoundsReport, OddHeightCanExceedParityFreeUpperBound) {
  const long double a = 1e-4L;
  const long double b = b_upper_boundary(a, 0.0L);
  ASSERT_EQ(classify(T{a, b, 0.0L}), RegionLabel::B);
  const auto traj = evolve(a, b, FailureSchedule::none(), 20);
  bool odd_exceeds = false;
  for (std::uint32_t h = 2; h <= 20; ++h) {
    const auto r = make_bounds_report(traj, std::uint64_t{1} << h, 0.5L);
    if (h % 2 == 0) {
      EXPECT_LE(r.measured_bits, r.parity_free_upper_bits) << h;
    } else {
      odd_exceeds = odd_exceeds || r.measured_bits > r.parity_free_upper_bits;
      EXPECT_LE(r.measured_bits, r.upper_bits) << h;
    }
  }
  EXPECT_TRUE(odd_exceeds);
}
