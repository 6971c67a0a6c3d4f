#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/operators.hpp"
#include "rawlskm/policy.hpp"
#include "rawlskm/utility.hpp"

namespace rawlskm {

enum class OperatorKind { r1, r2 };

inline const char* to_string(OperatorKind k) {
  return k == OperatorKind::r1 ? "r1" : "r2";
}

inline OperatorKind parse_operator_kind(const std::string& name) {
  if (name == "r1" || name == "R1") return OperatorKind::r1;
  if (name == "r2" || name == "R2") return OperatorKind::r2;
  throw std::invalid_argument("unknown operator '" + name + "' (expected r1 or r2)");
}

enum class TerminationReason { null_op, iteration_cap };

inline const char* to_string(TerminationReason r) {
  return r == TerminationReason::null_op ? "null-op" : "iteration-cap";
}

struct TrajectoryStep {
  int iteration = 0;  // consecutive from 1
  ReassignmentOp op;
  UtilityPoint point;
  SelectionBranch branch = SelectionBranch::null_op;
};

struct Trajectory {
  UtilityPoint start;
  std::vector<TrajectoryStep> steps;
  TerminationReason reason = TerminationReason::null_op;
};

struct TraverseConfig {
  OperatorKind op_kind = OperatorKind::r1;
  PruneConfig prune;               // r2 only
  std::size_t iteration_cap = 2000;
  LagSemantics semantics = LagSemantics::maximin();
  int threads = 1;
};

struct TraverseResult {
  Trajectory trajectory;
  ClusterAssignment final_assignment;
};

/// Hill-climbs the lag utility: generate candidates with the configured
/// operator, pick one per the selection policy, apply, repeat until the
/// null operation (no candidate raises the lag) or the iteration cap.
/// The utility state is rebuilt from scratch every iteration, so recorded
/// points never accumulate incremental-evaluation drift across steps.
inline TraverseResult traverse(const Dataset& dataset, const ClusterAssignment& start,
                               const TraverseConfig& config = {}) {
  ClusterAssignment current = start;
  UtilityState state = evaluate(dataset, current);

  TraverseResult result;
  result.trajectory.start = state.point;
  for (;;) {
    if (result.trajectory.steps.size() >= config.iteration_cap) {
      result.trajectory.reason = TerminationReason::iteration_cap;
      break;
    }
    std::vector<CandidateEvaluation> candidates =
        config.op_kind == OperatorKind::r1
            ? generate_r1(dataset, state, current, config.semantics, config.threads)
            : generate_r2(dataset, state, current, config.prune, config.semantics,
                          config.threads);
    std::vector<UtilityPoint> points;
    points.reserve(candidates.size());
    for (const auto& c : candidates) points.push_back(c.point);
    const Selection sel = select_best(state.point, points, config.semantics);
    if (!sel.chosen) {
      result.trajectory.reason = TerminationReason::null_op;
      break;
    }
    const CandidateEvaluation& chosen = candidates[*sel.chosen];
    current = apply(dataset, current, chosen.op);
    state = evaluate(dataset, current);
    TrajectoryStep step;
    step.iteration = static_cast<int>(result.trajectory.steps.size()) + 1;
    step.op = chosen.op;
    // Recorded from the fresh full evaluation, not the delta prediction, so
    // replaying any step from scratch reproduces the stored point exactly.
    step.point = state.point;
    step.branch = sel.branch;
    result.trajectory.steps.push_back(step);
  }
  result.final_assignment = std::move(current);
  return result;
}

}  // namespace rawlskm
