#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rawlskm/utility.hpp"

namespace rawlskm {

/// Indices (ascending) of the points not strictly dominated in both
/// coordinates: p is dropped iff some s has lag(s) > lag(p) AND
/// mag(s) > mag(p). Ties in either coordinate never dominate, so equal
/// points are all retained.
inline std::vector<std::size_t> skyline(std::span<const UtilityPoint> points,
                                        const LagSemantics& sem = LagSemantics::maximin()) {
  const std::size_t m = points.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = sem.mag_of(points[a]);
    const double mb = sem.mag_of(points[b]);
    if (ma != mb) return ma > mb;
    const double la = sem.lag_of(points[a]);
    const double lb = sem.lag_of(points[b]);
    if (la != lb) return la > lb;
    return a < b;
  });

  std::vector<std::size_t> kept;
  kept.reserve(m);
  // Sweep mag-descending. best_lag tracks the max lag among points whose
  // mag is strictly greater than the group under inspection; only those
  // can dominate it.
  double best_lag = 0;
  bool have_best = false;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    double group_max_lag = sem.lag_of(points[order[i]]);
    while (j < m && sem.mag_of(points[order[j]]) == sem.mag_of(points[order[i]])) {
      group_max_lag = std::max(group_max_lag, sem.lag_of(points[order[j]]));
      ++j;
    }
    for (std::size_t t = i; t < j; ++t) {
      if (!have_best || sem.lag_of(points[order[t]]) >= best_lag) {
        kept.push_back(order[t]);
      }
    }
    best_lag = have_best ? std::max(best_lag, group_max_lag) : group_max_lag;
    have_best = true;
    i = j;
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

enum class SelectionBranch { ne, nw_skyline, null_op };

inline const char* to_string(SelectionBranch b) {
  switch (b) {
    case SelectionBranch::ne: return "NE";
    case SelectionBranch::nw_skyline: return "NW";
    default: return "null";
  }
}

/// Outcome of one selection round: the chosen candidate's index within the
/// span handed to select_best, or nothing (the null operation).
struct Selection {
  std::optional<std::size_t> chosen;
  SelectionBranch branch = SelectionBranch::null_op;
};

/// Picks the next move's utility point among candidates that already improve
/// the lag utility (the generators enforce that precondition):
///   1. any candidate with mag >= current's mag (north-east): take the one
///      with the highest overall utility;
///   2. otherwise all candidates trade mag away (north-west): take the
///      skyline member with the highest overall utility;
///   3. no candidates: the null operation.
/// Ties on overall utility go to the lowest index, so the caller's
/// enumeration order is the final arbiter.
inline Selection select_best(const UtilityPoint& current,
                             std::span<const UtilityPoint> candidates,
                             const LagSemantics& sem = LagSemantics::maximin()) {
  Selection sel;
  if (candidates.empty()) return sel;

  std::optional<std::size_t> best_ne;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (sem.mag_of(candidates[i]) >= sem.mag_of(current)) {
      if (!best_ne || candidates[i].overall > candidates[*best_ne].overall) best_ne = i;
    }
  }
  if (best_ne) {
    sel.chosen = best_ne;
    sel.branch = SelectionBranch::ne;
    return sel;
  }

  const std::vector<std::size_t> front = skyline(candidates, sem);
  std::optional<std::size_t> best_nw;
  for (const std::size_t i : front) {
    if (!best_nw || candidates[i].overall > candidates[*best_nw].overall) best_nw = i;
  }
  sel.chosen = best_nw;
  sel.branch = SelectionBranch::nw_skyline;
  return sel;
}

}  // namespace rawlskm
