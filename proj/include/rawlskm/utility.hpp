#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"

namespace rawlskm {

/// Compensated (Kahan) accumulator. Group utilities are sums of up to n
/// per-example terms; compensation keeps the incremental-vs-scratch
/// agreement bound honest at n = 1000, F = 42.
class KahanSum {
 public:
  void add(double v) {
    const double term = v - comp_;
    const double total = sum_ + term;
    comp_ = (total - sum_) - term;
    sum_ = total;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

enum class LagGroup : int { group0 = 0, group1 = 1, tie = 2 };

inline const char* to_string(LagGroup g) {
  switch (g) {
    case LagGroup::group0: return "0";
    case LagGroup::group1: return "1";
    default: return "tie";
  }
}

/// One assignment's position in the MAG-LAG utility space.
struct UtilityPoint {
  std::array<double, 2> group_utility{0, 0};
  double lag_utility = 0;  // min of the two group utilities
  double mag_utility = 0;  // max of the two group utilities
  double overall = 0;      // example-weighted mean utility
  LagGroup lag_group = LagGroup::tie;
};

/// Derives lag/mag/lag_group from the group utilities. If one group is
/// empty, its utility is reported as the other group's (degenerate single
/// -group data collapses to lag = mag = overall, lag_group = tie).
inline UtilityPoint make_utility_point(std::array<double, 2> group_sum,
                                       std::array<std::size_t, 2> group_count) {
  const std::size_t n = group_count[0] + group_count[1];
  if (n == 0) throw std::invalid_argument("make_utility_point: no examples");
  UtilityPoint p;
  const double total = group_sum[0] + group_sum[1];
  p.overall = total / static_cast<double>(n);
  for (int g = 0; g < 2; ++g) {
    p.group_utility[static_cast<std::size_t>(g)] =
        group_count[static_cast<std::size_t>(g)] > 0
            ? group_sum[static_cast<std::size_t>(g)] /
                  static_cast<double>(group_count[static_cast<std::size_t>(g)])
            : 0.0;
  }
  if (group_count[0] == 0) p.group_utility[0] = p.group_utility[1];
  if (group_count[1] == 0) p.group_utility[1] = p.group_utility[0];
  if (p.group_utility[0] < p.group_utility[1]) {
    p.lag_group = LagGroup::group0;
  } else if (p.group_utility[1] < p.group_utility[0]) {
    p.lag_group = LagGroup::group1;
  } else {
    p.lag_group = LagGroup::tie;
  }
  p.lag_utility = std::min(p.group_utility[0], p.group_utility[1]);
  p.mag_utility = std::max(p.group_utility[0], p.group_utility[1]);
  return p;
}

/// Which group plays the "least advantaged" role when filtering and
/// selecting candidate moves. The default re-derives it from each point
/// (maximin); pinning it to a fixed group is an ablation mode.
struct LagSemantics {
  static LagSemantics maximin() { return LagSemantics{}; }
  static LagSemantics pinned(int group) {
    if (group != 0 && group != 1) throw std::invalid_argument("LagSemantics: group must be 0 or 1");
    LagSemantics s;
    s.pinned_group = group;
    return s;
  }

  bool is_pinned() const { return pinned_group >= 0; }

  /// The utility being raised (LAG axis).
  double lag_of(const UtilityPoint& p) const {
    return is_pinned() ? p.group_utility[static_cast<std::size_t>(pinned_group)]
                       : p.lag_utility;
  }
  /// The other axis (MAG axis).
  double mag_of(const UtilityPoint& p) const {
    return is_pinned() ? p.group_utility[static_cast<std::size_t>(1 - pinned_group)]
                       : p.mag_utility;
  }

  int pinned_group = -1;  // -1 = maximin
};

inline std::string to_string(const LagSemantics& s) {
  return s.is_pinned() ? "pinned:" + std::to_string(s.pinned_group) : "maximin";
}

/// One or two (example -> target cluster) moves; the unified currency of the
/// single and pair reassignment operators.
struct Move {
  int example_id = 0;
  int target_cluster = 0;
};

/// Exact utility bookkeeping for one assignment, with the per-cluster
/// sufficient statistics that make hypothetical-move evaluation
/// O(affected clusters x F) instead of O(n x F).
struct UtilityState {
  std::vector<double> example_utility;             // u(x) per example
  std::array<double, 2> group_sum{0, 0};           // per-group utility sums
  std::array<std::size_t, 2> group_count{0, 0};
  std::vector<std::vector<int>> members;           // example ids per cluster
  UtilityPoint point;

  // Per cluster c and group g: member count, feature sum, squared-norm sum,
  // and the utility sum computed at the last full evaluation.
  std::vector<std::array<int, 2>> cluster_group_count;
  std::vector<std::array<std::vector<double>, 2>> cluster_group_feature_sum;
  std::vector<std::array<double, 2>> cluster_group_sqnorm_sum;
  std::vector<std::array<double, 2>> cluster_group_utility_sum;
  std::vector<double> example_sqnorm;              // ||x||^2 per example
};

/// Full from-scratch evaluation of an assignment's utilities (per example,
/// per group, overall) plus the incremental-evaluation statistics.
inline UtilityState evaluate(const Dataset& dataset, const ClusterAssignment& assignment) {
  const std::size_t n = dataset.size();
  if (assignment.labels.size() != n) {
    throw std::invalid_argument("evaluate: assignment/dataset size mismatch");
  }
  const int k = assignment.k;
  UtilityState state;
  state.example_utility.resize(n);
  state.example_sqnorm.resize(n);
  state.members.assign(static_cast<std::size_t>(k), {});
  state.cluster_group_count.assign(static_cast<std::size_t>(k), {0, 0});
  state.cluster_group_feature_sum.assign(static_cast<std::size_t>(k), {});
  state.cluster_group_sqnorm_sum.assign(static_cast<std::size_t>(k), {0.0, 0.0});
  state.cluster_group_utility_sum.assign(static_cast<std::size_t>(k), {0.0, 0.0});
  for (int c = 0; c < k; ++c) {
    for (int g = 0; g < 2; ++g) {
      state.cluster_group_feature_sum[static_cast<std::size_t>(c)][static_cast<std::size_t>(g)]
          .assign(static_cast<std::size_t>(dataset.feature_count), 0.0);
    }
  }

  std::array<KahanSum, 2> group_sums;
  std::vector<std::array<KahanSum, 2>> cluster_sums(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = dataset.examples[i];
    const auto c = static_cast<std::size_t>(assignment.labels[i]);
    const auto g = static_cast<std::size_t>(ex.group);
    const double u =
        dataset.delta - squared_distance(ex.features, assignment.centroids[c]);
    state.example_utility[i] = u;
    double sqnorm = 0;
    for (const double v : ex.features) sqnorm += v * v;
    state.example_sqnorm[i] = sqnorm;
    state.members[c].push_back(ex.id);
    group_sums[g].add(u);
    cluster_sums[c][g].add(u);
    ++state.group_count[g];
    ++state.cluster_group_count[c][g];
    auto& fsum = state.cluster_group_feature_sum[c][g];
    for (std::size_t j = 0; j < ex.features.size(); ++j) fsum[j] += ex.features[j];
    state.cluster_group_sqnorm_sum[c][g] += state.example_sqnorm[i];
  }
  for (int g = 0; g < 2; ++g) {
    state.group_sum[static_cast<std::size_t>(g)] =
        group_sums[static_cast<std::size_t>(g)].value();
  }
  for (int c = 0; c < k; ++c) {
    if (state.members[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument("evaluate: cluster " + std::to_string(c) + " is empty");
    }
    for (int g = 0; g < 2; ++g) {
      state.cluster_group_utility_sum[static_cast<std::size_t>(c)][static_cast<std::size_t>(g)] =
          cluster_sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(g)].value();
    }
  }
  state.point = make_utility_point(state.group_sum, state.group_count);
  return state;
}

/// Inspection only: utilities under the nearest-centroid reading, where
/// d(x, C) is the distance to the closest centroid regardless of x's label.
/// Under this reading reassignments never change any utility, so the
/// postprocessing path always uses assigned-centroid utilities instead.
inline UtilityPoint evaluate_nearest(const Dataset& dataset,
                                     const ClusterAssignment& assignment) {
  std::array<KahanSum, 2> sums;
  std::array<std::size_t, 2> counts{0, 0};
  for (const Example& ex : dataset.examples) {
    double best = squared_distance(ex.features, assignment.centroids[0]);
    for (int c = 1; c < assignment.k; ++c) {
      best = std::min(best, squared_distance(ex.features,
                                             assignment.centroids[static_cast<std::size_t>(c)]));
    }
    sums[static_cast<std::size_t>(ex.group)].add(dataset.delta - best);
    ++counts[static_cast<std::size_t>(ex.group)];
  }
  return make_utility_point({sums[0].value(), sums[1].value()}, counts);
}

namespace detail {

struct ScratchCluster {
  int cluster = -1;
  std::array<int, 2> count_delta{0, 0};
  std::array<double, 2> sqnorm_delta{0, 0};
  // feature-sum deltas are stored in DeltaScratch::feature_buffer to avoid
  // reallocating per candidate
};

}  // namespace detail

/// Reusable buffers for evaluate_move_delta. One instance per thread.
struct DeltaScratch {
  std::array<detail::ScratchCluster, 4> clusters;
  std::size_t stride = 0;              // feature count
  std::vector<double> feature_buffer;  // 4 clusters x 2 groups x F
  std::vector<double> centroid_buffer; // 4 clusters x F

  double* feature_delta(int slot, int group) {
    return feature_buffer.data() +
           (static_cast<std::size_t>(slot) * 2 + static_cast<std::size_t>(group)) * stride;
  }
};

/// Evaluates the utility point of the assignment that would result from
/// applying 0, 1, or 2 moves, without mutating anything. Only the affected
/// clusters' statistics are touched. Returns nullopt when the moves would
/// empty a cluster (candidate rejected, not fatal). The result matches a
/// full evaluate() of the mutated assignment within 1e-9 in every field.
inline std::optional<UtilityPoint> evaluate_move_delta(const UtilityState& state,
                                                       const Dataset& dataset,
                                                       const ClusterAssignment& assignment,
                                                       std::span<const Move> moves,
                                                       DeltaScratch& scratch) {
  if (moves.empty()) return state.point;
  if (moves.size() > 2) {
    throw std::invalid_argument("evaluate_move_delta: at most 2 moves");
  }
  if (moves.size() == 2 && moves[0].example_id == moves[1].example_id) {
    throw std::invalid_argument("evaluate_move_delta: moves must touch distinct examples");
  }
  const std::size_t f = static_cast<std::size_t>(dataset.feature_count);
  if (scratch.stride != f) {
    scratch.stride = f;
    scratch.feature_buffer.assign(8 * f, 0.0);
    scratch.centroid_buffer.assign(4 * f, 0.0);
  }

  // Collect affected clusters into scratch slots. Each slot accumulates pure
  // deltas (zero-initialised) so that a pair exchanging two examples with
  // bitwise-identical feature vectors cancels to an exactly-zero delta and the
  // candidate point comes out bitwise equal to the current point.
  int slot_count = 0;
  auto slot_of = [&](int cluster) -> int {
    for (int s = 0; s < slot_count; ++s) {
      if (scratch.clusters[static_cast<std::size_t>(s)].cluster == cluster) return s;
    }
    const int s = slot_count++;
    auto& sc = scratch.clusters[static_cast<std::size_t>(s)];
    sc.cluster = cluster;
    sc.count_delta = {0, 0};
    sc.sqnorm_delta = {0.0, 0.0};
    for (int g = 0; g < 2; ++g) {
      double* dst = scratch.feature_delta(s, g);
      std::fill(dst, dst + f, 0.0);
    }
    return s;
  };

  for (const Move& m : moves) {
    const auto idx = static_cast<std::size_t>(m.example_id);
    if (idx >= dataset.size()) throw std::invalid_argument("evaluate_move_delta: bad example id");
    const int source = assignment.labels[idx];
    if (m.target_cluster == source) {
      throw std::invalid_argument("evaluate_move_delta: target equals current label");
    }
    if (m.target_cluster < 0 || m.target_cluster >= assignment.k) {
      throw std::invalid_argument("evaluate_move_delta: target cluster out of range");
    }
    const auto g = static_cast<std::size_t>(dataset.examples[idx].group);
    const auto& feat = dataset.examples[idx].features;
    const int src_slot = slot_of(source);
    const int tgt_slot = slot_of(m.target_cluster);
    auto& src = scratch.clusters[static_cast<std::size_t>(src_slot)];
    auto& tgt = scratch.clusters[static_cast<std::size_t>(tgt_slot)];
    --src.count_delta[g];
    ++tgt.count_delta[g];
    src.sqnorm_delta[g] -= state.example_sqnorm[idx];
    tgt.sqnorm_delta[g] += state.example_sqnorm[idx];
    double* src_sum = scratch.feature_delta(src_slot, static_cast<int>(g));
    double* tgt_sum = scratch.feature_delta(tgt_slot, static_cast<int>(g));
    for (std::size_t j = 0; j < f; ++j) {
      src_sum[j] -= feat[j];
      tgt_sum[j] += feat[j];
    }
  }

  // Reject if any affected cluster ends empty.
  for (int s = 0; s < slot_count; ++s) {
    const auto& sc = scratch.clusters[static_cast<std::size_t>(s)];
    const auto& base = state.cluster_group_count[static_cast<std::size_t>(sc.cluster)];
    if (base[0] + sc.count_delta[0] + base[1] + sc.count_delta[1] == 0) return std::nullopt;
  }

  // New centroids and closed-form utility sums for the affected clusters:
  //   sum_{x in C_g} (delta - ||x - c||^2)
  //     = n_g * delta - Q_g + 2 <s_g, c> - n_g * ||c||^2
  // with Q_g the squared-norm sum and s_g the feature sum of the group's
  // members. Slots whose deltas cancelled exactly contribute nothing, which
  // keeps no-op exchanges from leaking closed-form-versus-running-sum noise
  // into the comparison against the current point.
  std::array<double, 2> new_group_sum = state.group_sum;
  for (int s = 0; s < slot_count; ++s) {
    const auto& sc = scratch.clusters[static_cast<std::size_t>(s)];
    const auto c = static_cast<std::size_t>(sc.cluster);
    double* d0 = scratch.feature_delta(s, 0);
    double* d1 = scratch.feature_delta(s, 1);
    if (sc.count_delta[0] == 0 && sc.count_delta[1] == 0 && sc.sqnorm_delta[0] == 0.0 &&
        sc.sqnorm_delta[1] == 0.0 &&
        std::all_of(d0, d0 + f, [](double v) { return v == 0.0; }) &&
        std::all_of(d1, d1 + f, [](double v) { return v == 0.0; })) {
      continue;
    }
    std::array<int, 2> count = state.cluster_group_count[c];
    std::array<double, 2> sqnorm = state.cluster_group_sqnorm_sum[c];
    for (int g = 0; g < 2; ++g) {
      count[static_cast<std::size_t>(g)] += sc.count_delta[static_cast<std::size_t>(g)];
      sqnorm[static_cast<std::size_t>(g)] += sc.sqnorm_delta[static_cast<std::size_t>(g)];
      const double* base = state.cluster_group_feature_sum[c][static_cast<std::size_t>(g)].data();
      double* d = g == 0 ? d0 : d1;
      for (std::size_t j = 0; j < f; ++j) d[j] += base[j];
    }
    double* centroid = scratch.centroid_buffer.data() + static_cast<std::size_t>(s) * f;
    const double total_count = count[0] + count[1];
    double centroid_sqnorm = 0;
    for (std::size_t j = 0; j < f; ++j) {
      centroid[j] = (d0[j] + d1[j]) / total_count;
      centroid_sqnorm += centroid[j] * centroid[j];
    }
    for (int g = 0; g < 2; ++g) {
      const double* gsum = g == 0 ? d0 : d1;
      double dot = 0;
      for (std::size_t j = 0; j < f; ++j) dot += gsum[j] * centroid[j];
      const double new_usum = count[static_cast<std::size_t>(g)] * dataset.delta -
                              sqnorm[static_cast<std::size_t>(g)] + 2.0 * dot -
                              count[static_cast<std::size_t>(g)] * centroid_sqnorm;
      new_group_sum[static_cast<std::size_t>(g)] +=
          new_usum - state.cluster_group_utility_sum[c][static_cast<std::size_t>(g)];
    }
  }
  return make_utility_point(new_group_sum, state.group_count);
}

/// Convenience overload with its own scratch buffers.
inline std::optional<UtilityPoint> evaluate_move_delta(const UtilityState& state,
                                                       const Dataset& dataset,
                                                       const ClusterAssignment& assignment,
                                                       std::span<const Move> moves) {
  DeltaScratch scratch;
  return evaluate_move_delta(state, dataset, assignment, moves, scratch);
}

}  // namespace rawlskm
