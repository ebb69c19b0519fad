#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "relaytree/error.hpp"
#include "relaytree/fusion.hpp"
#include "relaytree/schedule.hpp"
#include "relaytree/trajectory.hpp"

namespace relaytree {

/// One realized subtree shape, summarized by the Type I / Type II error of
/// the decision it delivers, with the probability of that shape.
template <std::floating_point Real = long double>
struct PairAtom {
  Real type1 = 0;
  Real type2 = 0;
  Real weight = 0;
};

template <std::floating_point Real = long double>
struct OracleLevel {
  std::size_t k = 0;
  std::size_t atom_count = 0;
  Real data_prob = 1;   // probability a level-k node has data (1 - P_k)
  Real silence = 0;     // probability its parent hears nothing from it
  Real mean_type1 = 0;  // conditional on having data
  Real mean_type2 = 0;
  FusionRule rule_below = FusionRule::Or;  // rule used to build this level (k >= 1)
};

/// Exact law of the (Type I, Type II) pair at the root, conditional on the
/// root having data, together with per-level bookkeeping.
template <std::floating_point Real = long double>
struct PairDistribution {
  std::vector<PairAtom<Real>> atoms;
  Real data_prob = 1;
  std::vector<OracleLevel<Real>> levels;

  Real total_weight() const {
    Real s = 0;
    for (const auto& a : atoms) s += a.weight;
    return s;
  }
  Real mean_type1() const {
    Real s = 0;
    for (const auto& a : atoms) s += a.weight * a.type1;
    return s;
  }
  Real mean_type2() const {
    Real s = 0;
    for (const auto& a : atoms) s += a.weight * a.type2;
    return s;
  }
};

inline constexpr std::size_t kOracleMaxHeight = 6;
inline constexpr std::size_t kOracleDefaultAtomBudget = 4'000'000;
inline constexpr double kOracleMergeTolerance = 1e-14;

namespace detail {

template <std::floating_point Real>
std::vector<PairAtom<Real>> merge_close_atoms(std::vector<PairAtom<Real>> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
    return a.type1 < b.type1 || (a.type1 == b.type1 && a.type2 < b.type2);
  });
  std::vector<PairAtom<Real>> out;
  out.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (!out.empty()) {
      auto& last = out.back();
      if (std::fabs(a.type1 - last.type1) < Real(kOracleMergeTolerance) &&
          std::fabs(a.type2 - last.type2) < Real(kOracleMergeTolerance)) {
        // Weighted average keeps the mean unchanged.
        const Real w = last.weight + a.weight;
        if (w > Real(0)) {
          last.type1 = (last.type1 * last.weight + a.type1 * a.weight) / w;
          last.type2 = (last.type2 * last.weight + a.type2 * a.weight) / w;
        }
        last.weight = w;
        continue;
      }
    }
    out.push_back(a);
  }
  return out;
}

template <std::floating_point Real>
PairAtom<Real> combine(const PairAtom<Real>& x, const PairAtom<Real>& y, FusionRule rule, Real weight) {
  if (rule == FusionRule::Or) {
    return {Real(1) - (Real(1) - x.type1) * (Real(1) - y.type1), x.type2 * y.type2, weight};
  }
  return {x.type1 * y.type1, Real(1) - (Real(1) - x.type2) * (Real(1) - y.type2), weight};
}

}  // namespace detail

/// Builds the root distribution bottom-up by enumerating which children are
/// heard at every node. A child is heard with probability 1 - q_k, where
/// q_k = 1 - (1 - P_k)(1 - p_k) is tracked here directly from the data
/// probabilities. One heard child forwards its pair; two heard children are
/// combined with the level's fixed rule, chosen from the nominal recursion.
///
/// The atom count grows roughly quadratically per level; `atom_budget` caps
/// the work and DomainError is thrown when a level would exceed it.
template <std::floating_point Real = long double>
PairDistribution<Real> exact_pair_distribution(Real alpha0, Real beta0, const FailureSchedule& schedule,
                                               std::size_t height,
                                               std::size_t atom_budget = kOracleDefaultAtomBudget) {
  if (height > kOracleMaxHeight) {
    throw InvalidArgument("exact oracle supports heights up to " + std::to_string(kOracleMaxHeight));
  }
  const auto nominal = evolve<Real>(alpha0, beta0, schedule, height);

  PairDistribution<Real> dist;
  dist.atoms = {{alpha0, beta0, Real(1)}};
  Real data = 1;

  auto snapshot = [&](std::size_t k, FusionRule rule) {
    OracleLevel<Real> lv;
    lv.k = k;
    lv.atom_count = dist.atoms.size();
    lv.data_prob = data;
    lv.silence = Real(1) - data * (Real(1) - static_cast<Real>(schedule.p(k)));
    lv.mean_type1 = dist.mean_type1();
    lv.mean_type2 = dist.mean_type2();
    lv.rule_below = rule;
    dist.levels.push_back(lv);
  };
  snapshot(0, FusionRule::Or);

  for (std::size_t k = 0; k < height; ++k) {
    const Real q = dist.levels.back().silence;
    if (!(q < Real(1))) throw DomainError("every message is lost at level " + std::to_string(k));
    const FusionRule rule = fusion_rule_for(nominal[k].state.alpha, nominal[k].state.beta);
    const std::size_t n = dist.atoms.size();
    if (n + n * (n + 1) / 2 > atom_budget) {
      throw DomainError("exact oracle would need more than " + std::to_string(atom_budget) + " atoms at level " +
                        std::to_string(k + 1));
    }
    const Real one_heard = Real(2) * q / (Real(1) + q);
    const Real both_heard = (Real(1) - q) / (Real(1) + q);

    std::vector<PairAtom<Real>> next;
    next.reserve(n + n * (n + 1) / 2);
    if (one_heard > Real(0)) {
      for (const auto& a : dist.atoms) next.push_back({a.type1, a.type2, one_heard * a.weight});
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const Real pair_weight = (i == j ? Real(1) : Real(2)) * dist.atoms[i].weight * dist.atoms[j].weight;
        next.push_back(detail::combine(dist.atoms[i], dist.atoms[j], rule, both_heard * pair_weight));
      }
    }
    dist.atoms = detail::merge_close_atoms(std::move(next));
    data = Real(1) - q * q;
    snapshot(k + 1, rule);
  }
  dist.data_prob = data;
  return dist;
}

}  // namespace relaytree
