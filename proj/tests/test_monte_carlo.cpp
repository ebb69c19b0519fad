#include <gtest/gtest.h>

#include <cmath>

#include "oracles/brute_force.hpp"
#include "relaytree/error.hpp"
#include "relaytree/monte_carlo.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

using namespace relaytree;

namespace {
SimConfig config(double a, double b, std::size_t h, std::uint64_t trials, std::uint64_t seed = 42) {
  SimConfig c;
  c.alpha0 = a;
  c.beta0 = b;
  c.height = h;
  c.trials = trials;
  c.seed = seed;
  return c;
}

bool same(const SimEstimate& x, const SimEstimate& y) {
  return x.rooted_trials == y.rooted_trials && x.est_type1 == y.est_type1 && x.est_type2 == y.est_type2 &&
         x.est_starvation == y.est_starvation && x.half_width_95 == y.half_width_95 && x.silence == y.silence;
}
}  // namespace

TEST(MonteCarlo, PerfectSensorsNeverErr) {
  const auto est = monte_carlo(config(0.0, 0.0, 5, 2000), FailureSchedule::constant(0.2L));
  EXPECT_EQ(est.est_type1, 0.0);
  EXPECT_EQ(est.est_type2, 0.0);
}

TEST(MonteCarlo, NoFailureMatchesRecursion) {
  const auto est = monte_carlo(config(0.1, 0.2, 4, 100'000), FailureSchedule::none());
  const auto traj = evolve<long double>(0.1L, 0.2L, FailureSchedule::none(), 4);
  EXPECT_EQ(est.est_starvation, 0.0);
  EXPECT_NEAR(est.est_type1, static_cast<double>(traj.root().state.alpha), 4 * est.half_width_95);
  EXPECT_NEAR(est.est_type2, static_cast<double>(traj.root().state.beta), 4 * est.half_width_95);
}

TEST(MonteCarlo, MatchesFullTreeEnumerationWithFailures) {
  const auto s = FailureSchedule::geometric(0.3L, 0.5L);
  std::vector<double> p;
  for (std::size_t k = 0; k <= 3; ++k) p.push_back(static_cast<double>(s.p(k)));
  const auto ref = oracle::enumerate_tree(0.2, 0.15, p, 3);
  const auto est = monte_carlo(config(0.2, 0.15, 3, 100'000, 5), s);
  EXPECT_NEAR(est.est_type1, ref.alpha, 4 * est.se_type1);
  EXPECT_NEAR(est.est_type2, ref.beta, 4 * est.se_type2);
  EXPECT_NEAR(est.est_starvation, 1 - ref.data_prob, 4 * est.se_starvation);
  for (std::size_t k = 0; k < 3; ++k) {
    const double n = 100'000.0 * static_cast<double>(std::size_t{1} << (3 - k));
    const double se = std::sqrt(ref.silence[k] * (1 - ref.silence[k]) / n);
    EXPECT_NEAR(est.silence[k], ref.silence[k], 5 * se + 1e-12) << k;
  }
}

TEST(MonteCarlo, SilenceLawAtEveryLevel) {
  const auto s = FailureSchedule::quadratic(0.3L);
  const auto est = monte_carlo(config(0.1, 0.2, 6, 20'000), s);
  const auto traj = evolve<long double>(0.1L, 0.2L, s, 6);
  for (std::size_t k = 0; k < 6; ++k) {
    const double q = static_cast<double>(traj[k].state.q);
    const double n = 20'000.0 * static_cast<double>(std::size_t{1} << (6 - k));
    EXPECT_NEAR(est.silence[k], q, 5 * std::sqrt(q * (1 - q) / n) + 1e-12) << k;
  }
}

TEST(MonteCarlo, DeterministicForSeedAndThreadCount) {
  const auto s = FailureSchedule::quadratic(0.1L);
  auto c = config(0.1, 0.2, 5, 5000, 99);
  c.threads = 1;
  const auto one = monte_carlo(c, s);
  c.threads = 3;
  const auto three = monte_carlo(c, s);
  EXPECT_TRUE(same(one, three));
  const auto again = monte_carlo(c, s);
  EXPECT_TRUE(same(three, again));
  c.seed = 100;
  EXPECT_FALSE(same(one, monte_carlo(c, s)));
}

TEST(MonteCarlo, ErrorShrinksWithTrials) {
  const auto s = FailureSchedule::constant(0.05L);
  const auto small = monte_carlo(config(0.2, 0.3, 4, 10'000, 1), s);
  const auto large = monte_carlo(config(0.2, 0.3, 4, 160'000, 2), s);
  EXPECT_NEAR(large.half_width_95 / small.half_width_95, 0.25, 0.02);
}

TEST(MonteCarlo, UnconditionalMetric) {
  auto c = config(0.1, 0.2, 3, 20'000);
  c.prior0 = 0.3;
  const auto est = monte_carlo(c, FailureSchedule::constant(0.4L));
  const double expected = (1 - est.est_starvation) * (0.3 * est.est_type1 + 0.7 * est.est_type2) +
                          est.est_starvation * 0.3;
  EXPECT_NEAR(est.est_unconditional, expected, 1e-15);
  EXPECT_GT(est.est_starvation, 0.0);
}

TEST(MonteCarlo, Preconditions) {
  EXPECT_THROW(monte_carlo(config(0.1, 0.2, 0, 10), FailureSchedule::none()), InvalidArgument);
  EXPECT_THROW(monte_carlo(config(0.1, 0.2, 3, 0), FailureSchedule::none()), InvalidArgument);
  EXPECT_THROW(monte_carlo(config(0.1, 0.2, 25, 1), FailureSchedule::none()), InvalidArgument);
}
