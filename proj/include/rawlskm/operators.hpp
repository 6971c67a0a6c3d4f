#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/parallel.hpp"
#include "rawlskm/random.hpp"
#include "rawlskm/utility.hpp"

namespace rawlskm {

/// One or two example reassignments, applied together. Pairs are normalized
/// to ascending example id so an unordered pair has one canonical form.
struct ReassignmentOp {
  std::array<Move, 2> moves{};
  int size = 1;

  std::span<const Move> span() const {
    return {moves.data(), static_cast<std::size_t>(size)};
  }
};

inline ReassignmentOp make_op(Move a) { return ReassignmentOp{{a, Move{}}, 1}; }

inline ReassignmentOp make_op(Move a, Move b) {
  if (a.example_id == b.example_id) {
    throw std::invalid_argument("make_op: pair must touch distinct examples");
  }
  if (b.example_id < a.example_id) std::swap(a, b);
  return ReassignmentOp{{a, b}, 2};
}

inline bool operator==(const ReassignmentOp& lhs, const ReassignmentOp& rhs) {
  if (lhs.size != rhs.size) return false;
  for (int i = 0; i < lhs.size; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (lhs.moves[u].example_id != rhs.moves[u].example_id ||
        lhs.moves[u].target_cluster != rhs.moves[u].target_cluster) {
      return false;
    }
  }
  return true;
}

/// Serialized as "x17->3" for single moves, "x17->3;x204->1" for pairs.
inline std::string to_string(const ReassignmentOp& op) {
  std::string out;
  for (int i = 0; i < op.size; ++i) {
    if (i > 0) out += ';';
    const auto u = static_cast<std::size_t>(i);
    out += 'x';
    out += std::to_string(op.moves[u].example_id);
    out += "->";
    out += std::to_string(op.moves[u].target_cluster);
  }
  return out;
}

/// A candidate op together with the utility point it would produce and its
/// position in the generator's enumeration (the deterministic tie-breaker).
struct CandidateEvaluation {
  ReassignmentOp op;
  UtilityPoint point;
  std::size_t enumeration_index = 0;
};

/// Applies an op to a copy of the assignment and restores all invariants
/// (labels, centroids, sizes). The input assignment is untouched.
inline ClusterAssignment apply(const Dataset& dataset, const ClusterAssignment& assignment,
                               const ReassignmentOp& op) {
  std::vector<int> labels = assignment.labels;
  for (int i = 0; i < op.size; ++i) {
    const Move& m = op.moves[static_cast<std::size_t>(i)];
    const auto idx = static_cast<std::size_t>(m.example_id);
    if (idx >= labels.size()) throw std::invalid_argument("apply: example id out of range");
    if (m.target_cluster < 0 || m.target_cluster >= assignment.k) {
      throw std::invalid_argument("apply: target cluster out of range");
    }
    if (labels[idx] == m.target_cluster) {
      throw std::invalid_argument("apply: target equals current label");
    }
    labels[idx] = m.target_cluster;
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(assignment.k), 0);
  for (const int label : labels) ++sizes[static_cast<std::size_t>(label)];
  for (int c = 0; c < assignment.k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0) {
      throw std::invalid_argument("apply: op would empty cluster " + std::to_string(c));
    }
  }
  ClusterAssignment next;
  next.k = assignment.k;
  next.labels = std::move(labels);
  auto [centroids, counts] = recompute_centroids(dataset, next.labels, next.k);
  next.centroids = std::move(centroids);
  next.cluster_sizes = std::move(counts);
  return next;
}

namespace detail {

/// Single moves enumerate lexicographically by (example id, target cluster),
/// skipping the current label: index = id * (k-1) + target rank.
inline Move single_move_at(const ClusterAssignment& assignment, std::size_t enum_index, int k) {
  const auto id = static_cast<int>(enum_index / static_cast<std::size_t>(k - 1));
  const auto rank = static_cast<int>(enum_index % static_cast<std::size_t>(k - 1));
  const int label = assignment.labels[static_cast<std::size_t>(id)];
  const int target = rank < label ? rank : rank + 1;
  return Move{id, target};
}

/// Evaluates every one of the n(k-1) single moves. Slot i holds the move's
/// resulting point, or nullopt when the move would empty its source cluster.
/// Schedule-independent: each worker writes only its own slots.
inline std::vector<std::optional<UtilityPoint>> evaluate_all_single_moves(
    const Dataset& dataset, const UtilityState& state, const ClusterAssignment& assignment,
    int threads) {
  const std::size_t n = dataset.size();
  const int k = assignment.k;
  if (k < 2) throw std::invalid_argument("evaluate_all_single_moves: need k >= 2");
  std::vector<std::optional<UtilityPoint>> results(n * static_cast<std::size_t>(k - 1));
  const int workers = std::max(1, threads);
  std::vector<DeltaScratch> scratch(static_cast<std::size_t>(workers));
  parallel_for_indexed(results.size(), workers, [&](std::size_t i, int worker) {
    const Move m = single_move_at(assignment, i, k);
    const Move moves[1] = {m};
    results[i] = evaluate_move_delta(state, dataset, assignment, moves,
                                     scratch[static_cast<std::size_t>(worker)]);
  });
  return results;
}

}  // namespace detail

/// All single reassignments that strictly raise the lag utility, in
/// lexicographic (example id, target cluster) order, each carrying its
/// predicted point and enumeration index.
inline std::vector<CandidateEvaluation> generate_r1(const Dataset& dataset,
                                                    const UtilityState& state,
                                                    const ClusterAssignment& assignment,
                                                    const LagSemantics& sem = LagSemantics::maximin(),
                                                    int threads = 1) {
  const auto evaluations =
      detail::evaluate_all_single_moves(dataset, state, assignment, threads);
  const double current_lag = sem.lag_of(state.point);
  std::vector<CandidateEvaluation> out;
  for (std::size_t i = 0; i < evaluations.size(); ++i) {
    if (!evaluations[i]) continue;
    if (sem.lag_of(*evaluations[i]) > current_lag) {
      out.push_back(CandidateEvaluation{
          make_op(detail::single_move_at(assignment, i, assignment.k)), *evaluations[i], i});
    }
  }
  return out;
}

/// Pruning knobs for pair generation: T_good is the union of the top p% of
/// single moves by resulting lag utility and the top q% by resulting
/// overall utility. 100/100 disables pruning entirely.
struct PruneConfig {
  double p_pct = 5.0;
  double q_pct = 5.0;
  std::optional<std::size_t> good_cap;  // hard cap on |T_good| after the union

  void validate() const {
    if (!(p_pct > 0.0 && p_pct <= 100.0) || !(q_pct > 0.0 && q_pct <= 100.0)) {
      throw std::invalid_argument("PruneConfig: percentages must be in (0, 100]");
    }
    if (good_cap && *good_cap == 0) {
      throw std::invalid_argument("PruneConfig: good_cap must be positive");
    }
  }
};

namespace detail {

/// Picks the enumeration indices of the top ceil(pct% of |T|) evaluable
/// single moves under `key`, including any entries tied with the cutoff
/// value. |T| counts the full enumeration, evaluable or not.
template <typename Key>
std::vector<std::size_t> top_percent_indices(
    const std::vector<std::optional<UtilityPoint>>& evaluations, double pct, Key key) {
  std::vector<std::size_t> evaluable;
  evaluable.reserve(evaluations.size());
  for (std::size_t i = 0; i < evaluations.size(); ++i) {
    if (evaluations[i]) evaluable.push_back(i);
  }
  std::stable_sort(evaluable.begin(), evaluable.end(), [&](std::size_t a, std::size_t b) {
    return key(*evaluations[a]) > key(*evaluations[b]);
  });
  const auto want = static_cast<std::size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(evaluations.size())));
  std::size_t take = std::min(want, evaluable.size());
  while (take > 0 && take < evaluable.size() &&
         key(*evaluations[evaluable[take]]) == key(*evaluations[evaluable[take - 1]])) {
    ++take;
  }
  evaluable.resize(take);
  return evaluable;
}

}  // namespace detail

/// All pair reassignments composed from the pruned single-move pool that
/// strictly raise the lag utility. Each unordered pair of distinct examples
/// is evaluated once, jointly; pairs that would empty a cluster are skipped.
/// Output is ordered lexicographically by (x1, C1', x2, C2').
inline std::vector<CandidateEvaluation> generate_r2(const Dataset& dataset,
                                                    const UtilityState& state,
                                                    const ClusterAssignment& assignment,
                                                    const PruneConfig& prune = {},
                                                    const LagSemantics& sem = LagSemantics::maximin(),
                                                    int threads = 1) {
  prune.validate();
  const auto evaluations =
      detail::evaluate_all_single_moves(dataset, state, assignment, threads);

  // T_good as enumeration indices, ascending. With no pruning every single
  // move participates, including ones that alone would empty a cluster
  // (their pair partner can refill it).
  std::vector<std::size_t> good;
  if (prune.p_pct >= 100.0 && prune.q_pct >= 100.0) {
    good.resize(evaluations.size());
    for (std::size_t i = 0; i < good.size(); ++i) good[i] = i;
  } else {
    std::vector<std::size_t> by_lag = detail::top_percent_indices(
        evaluations, prune.p_pct, [](const UtilityPoint& p) { return p.lag_utility; });
    std::vector<std::size_t> by_overall = detail::top_percent_indices(
        evaluations, prune.q_pct, [](const UtilityPoint& p) { return p.overall; });
    good = std::move(by_lag);
    good.insert(good.end(), by_overall.begin(), by_overall.end());
    std::sort(good.begin(), good.end());
    good.erase(std::unique(good.begin(), good.end()), good.end());
  }
  if (prune.good_cap && good.size() > *prune.good_cap) good.resize(*prune.good_cap);

  // Enumerate ordered-normalized pairs (a < b in enumeration order; the
  // ascending-id normal form follows because ids are the enumeration
  // major key). Same-example pairs are invalid and get no index.
  struct PairRef {
    std::size_t first;
    std::size_t second;
  };
  std::vector<PairRef> pairs;
  const int k = assignment.k;
  for (std::size_t ai = 0; ai < good.size(); ++ai) {
    const int id_a = static_cast<int>(good[ai] / static_cast<std::size_t>(k - 1));
    for (std::size_t bi = ai + 1; bi < good.size(); ++bi) {
      const int id_b = static_cast<int>(good[bi] / static_cast<std::size_t>(k - 1));
      if (id_a == id_b) continue;
      pairs.push_back(PairRef{good[ai], good[bi]});
    }
  }

  const double current_lag = sem.lag_of(state.point);
  std::vector<std::optional<UtilityPoint>> results(pairs.size());
  const int workers = std::max(1, threads);
  std::vector<DeltaScratch> scratch(static_cast<std::size_t>(workers));
  parallel_for_indexed(pairs.size(), workers, [&](std::size_t i, int worker) {
    const Move a = detail::single_move_at(assignment, pairs[i].first, k);
    const Move b = detail::single_move_at(assignment, pairs[i].second, k);
    const Move moves[2] = {a, b};
    results[i] = evaluate_move_delta(state, dataset, assignment, moves,
                                     scratch[static_cast<std::size_t>(worker)]);
  });

  std::vector<CandidateEvaluation> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!results[i]) continue;
    if (sem.lag_of(*results[i]) > current_lag) {
      const Move a = detail::single_move_at(assignment, pairs[i].first, k);
      const Move b = detail::single_move_at(assignment, pairs[i].second, k);
      out.push_back(CandidateEvaluation{make_op(a, b), *results[i], i});
    }
  }
  return out;
}

/// Seeded uniform sample over the full pair space, reporting how many pairs
/// would lower the lag utility. A diagnostic estimator, not a generator.
struct PairSampleEstimate {
  std::size_t sample_size = 0;
  std::size_t lag_lowering = 0;
  std::size_t invalid = 0;  // sampled pairs that would empty a cluster
  double fraction = 0;      // lag_lowering / sample_size
};

inline PairSampleEstimate estimate_lag_lowering_pairs(const Dataset& dataset,
                                                      const UtilityState& state,
                                                      const ClusterAssignment& assignment,
                                                      std::size_t sample_size,
                                                      std::uint64_t seed,
                                                      const LagSemantics& sem = LagSemantics::maximin()) {
  const std::size_t n = dataset.size();
  const int k = assignment.k;
  if (n < 2 || k < 2) throw std::invalid_argument("estimate_lag_lowering_pairs: need n >= 2, k >= 2");
  Rng rng(seed);
  DeltaScratch scratch;
  PairSampleEstimate est;
  est.sample_size = sample_size;
  const double current_lag = sem.lag_of(state.point);
  for (std::size_t s = 0; s < sample_size; ++s) {
    const auto id_a = static_cast<int>(uniform_below(rng, n));
    auto id_b = static_cast<int>(uniform_below(rng, n - 1));
    if (id_b >= id_a) ++id_b;
    auto pick_target = [&](int id) {
      const int label = assignment.labels[static_cast<std::size_t>(id)];
      const auto rank = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k - 1)));
      return rank < label ? rank : rank + 1;
    };
    const Move moves[2] = {Move{id_a, pick_target(id_a)}, Move{id_b, pick_target(id_b)}};
    const auto point = evaluate_move_delta(state, dataset, assignment, moves, scratch);
    if (!point) {
      ++est.invalid;
      continue;
    }
    if (sem.lag_of(*point) < current_lag) ++est.lag_lowering;
  }
  est.fraction = sample_size == 0
                     ? 0.0
                     : static_cast<double>(est.lag_lowering) / static_cast<double>(sample_size);
  return est;
}

}  // namespace rawlskm
