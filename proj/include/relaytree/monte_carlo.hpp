#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "relaytree/error.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

namespace relaytree {

struct SimConfig {
  double alpha0 = 0.1;
  double beta0 = 0.2;
  std::size_t height = 1;
  std::uint64_t trials = 100'000;
  std::uint64_t seed = 1;
  double prior0 = 0.5;
  unsigned threads = 0;  // 0: one per hardware thread
};

struct SimEstimate {
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t rooted_trials = 0;  // trials in which the root had data
  double est_type1 = 0;             // conditional on the root having data
  double est_type2 = 0;
  double est_starvation = 0;
  double se_type1 = 0;
  double se_type2 = 0;
  double se_starvation = 0;
  double half_width_95 = 0;  // 1.96 x the largest of the three standard errors
  // Root error counting a starved root as deciding for the likelier hypothesis.
  double est_unconditional = 0;
  std::vector<double> silence;  // per level 0..height-1: fraction of nodes not heard by their parent
};

namespace detail {

struct SimCounts {
  std::uint64_t rooted = 0;
  std::uint64_t type1_errors = 0;
  std::uint64_t type2_errors = 0;
  std::vector<std::uint64_t> silent;  // per level

  void merge(const SimCounts& o) {
    rooted += o.rooted;
    type1_errors += o.type1_errors;
    type2_errors += o.type2_errors;
    for (std::size_t i = 0; i < silent.size(); ++i) silent[i] += o.silent[i];
  }
};

// Stream for one trial, a function of (seed, trial) only.
inline std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

// Bernoulli draw from the top 53 bits; identical on every platform.
inline bool draw(std::mt19937_64& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

struct TreeWorkspace {
  std::vector<std::uint8_t> present;  // message reaches the parent
  std::vector<std::uint8_t> err0;     // decision is wrong under H0
  std::vector<std::uint8_t> err1;     // decision is wrong under H1
};

inline void simulate_trial(std::mt19937_64& rng, const SimConfig& cfg, const std::vector<LevelFailure>& failures,
                           const std::vector<FusionRule>& rules, TreeWorkspace& ws, SimCounts& counts) {
  const std::size_t sensors = std::size_t{1} << cfg.height;
  for (std::size_t i = 0; i < sensors; ++i) {
    ws.err0[i] = draw(rng, cfg.alpha0);
    ws.err1[i] = draw(rng, cfg.beta0);
    const bool node_down = draw(rng, static_cast<double>(failures[0].node));
    const bool link_down = draw(rng, static_cast<double>(failures[0].link));
    ws.present[i] = !(node_down || link_down);
  }
  for (std::size_t level = 1; level <= cfg.height; ++level) {
    const std::size_t nodes = sensors >> level;
    const FusionRule rule = rules[level - 1];
    std::uint64_t silent_children = 0;
    for (std::size_t j = 0; j < nodes; ++j) {
      const std::size_t a = 2 * j, b = 2 * j + 1;
      const bool has_a = ws.present[a], has_b = ws.present[b];
      silent_children += !has_a + !has_b;
      bool has = true;
      std::uint8_t e0 = 0, e1 = 0;
      if (has_a && has_b) {
        if (rule == FusionRule::Or) {
          e0 = ws.err0[a] | ws.err0[b];
          e1 = ws.err1[a] & ws.err1[b];
        } else {
          e0 = ws.err0[a] & ws.err0[b];
          e1 = ws.err1[a] | ws.err1[b];
        }
      } else if (has_a) {
        e0 = ws.err0[a];
        e1 = ws.err1[a];
      } else if (has_b) {
        e0 = ws.err0[b];
        e1 = ws.err1[b];
      } else {
        has = false;
      }
      ws.err0[j] = e0;
      ws.err1[j] = e1;
      if (level < cfg.height) {
        const bool node_down = draw(rng, static_cast<double>(failures[level].node));
        const bool link_down = draw(rng, static_cast<double>(failures[level].link));
        ws.present[j] = has && !(node_down || link_down);
      } else if (has) {
        ++counts.rooted;
        counts.type1_errors += e0;
        counts.type2_errors += e1;
      }
    }
    counts.silent[level - 1] += silent_children;
  }
}

}  // namespace detail

/// Monte Carlo over randomly pruned trees. Each trial samples node failures
/// and link erasures for every node below the root, one sensor decision per
/// hypothesis, and propagates decisions upward: silent children are
/// skipped, a lone child is forwarded, two children are fused with the
/// level's fixed rule from the nominal recursion.
///
/// Trial i draws from a stream seeded by (seed, i), so the result does not
/// depend on the thread count.
inline SimEstimate monte_carlo(const SimConfig& cfg, const FailureSchedule& schedule) {
  if (cfg.trials == 0) throw InvalidArgument("monte_carlo needs at least one trial");
  if (cfg.height == 0) throw InvalidArgument("monte_carlo needs height >= 1");
  if (cfg.height > 24) throw InvalidArgument("monte_carlo supports heights up to 24");
  if (!(cfg.prior0 > 0.0 && cfg.prior0 < 1.0)) throw InvalidArgument("prior P(H0) must lie in (0, 1)");

  const auto nominal = evolve<long double>(cfg.alpha0, cfg.beta0, schedule, cfg.height);
  std::vector<FusionRule> rules;
  std::vector<LevelFailure> failures;
  for (std::size_t k = 0; k < cfg.height; ++k) {
    rules.push_back(fusion_rule_for(nominal[k].state.alpha, nominal[k].state.beta));
    failures.push_back(schedule.split(k));
  }

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, cfg.trials));

  std::vector<detail::SimCounts> partial(workers);
  auto run_range = [&](unsigned w) {
    auto& counts = partial[w];
    counts.silent.assign(cfg.height, 0);
    detail::TreeWorkspace ws;
    const std::size_t sensors = std::size_t{1} << cfg.height;
    ws.present.resize(sensors);
    ws.err0.resize(sensors);
    ws.err1.resize(sensors);
    const std::uint64_t begin = cfg.trials * w / workers;
    const std::uint64_t end = cfg.trials * (w + 1) / workers;
    for (std::uint64_t t = begin; t < end; ++t) {
      auto rng = detail::trial_stream(cfg.seed, t);
      detail::simulate_trial(rng, cfg, failures, rules, ws, counts);
    }
  };
  if (workers == 1) {
    run_range(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
    for (auto& th : pool) th.join();
  }

  detail::SimCounts total;
  total.silent.assign(cfg.height, 0);
  for (const auto& c : partial) total.merge(c);

  SimEstimate est;
  est.trials = cfg.trials;
  est.seed = cfg.seed;
  est.rooted_trials = total.rooted;
  const double n = static_cast<double>(cfg.trials);
  est.est_starvation = static_cast<double>(cfg.trials - total.rooted) / n;
  est.se_starvation = std::sqrt(est.est_starvation * (1.0 - est.est_starvation) / n);
  if (total.rooted > 0) {
    const double m = static_cast<double>(total.rooted);
    est.est_type1 = static_cast<double>(total.type1_errors) / m;
    est.est_type2 = static_cast<double>(total.type2_errors) / m;
    est.se_type1 = std::sqrt(est.est_type1 * (1.0 - est.est_type1) / m);
    est.se_type2 = std::sqrt(est.est_type2 * (1.0 - est.est_type2) / m);
  }
  est.half_width_95 = 1.96 * std::max({est.se_type1, est.se_type2, est.se_starvation});
  const double rooted_share = 1.0 - est.est_starvation;
  est.est_unconditional = rooted_share * (cfg.prior0 * est.est_type1 + (1.0 - cfg.prior0) * est.est_type2) +
                          est.est_starvation * std::min(cfg.prior0, 1.0 - cfg.prior0);
  for (std::size_t k = 0; k < cfg.height; ++k) {
    const double nodes = n * static_cast<double>(std::size_t{1} << (cfg.height - k));
    est.silence.push_back(static_cast<double>(total.silent[k]) / nodes);
  }
  return est;
}

}  // namespace relaytree
