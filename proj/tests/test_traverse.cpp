#include <catch2/catch_amalgamated.hpp>

#include <cstddef>
#include <string>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/operators.hpp"
#include "rawlskm/policy.hpp"
#include "rawlskm/traverse.hpp"
#include "rawlskm/utility.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

/// A start with at least one strictly lag-raising single move, found by
/// seeded search so every assertion downstream is deterministic.
struct ClimbableStart {
  rawlskm::Dataset dataset;
  rawlskm::ClusterAssignment assignment;
};

ClimbableStart make_climbable(std::uint64_t seed, std::size_t n, int k) {
  rawlskm::Rng rng(seed);
  for (int attempt = 0; attempt < 50; ++attempt) {
    rawlskm::Dataset ds = testsupport::random_instance(rng, n, 3);
    rawlskm::ClusterAssignment assignment = testsupport::random_assignment(rng, ds, k);
    const rawlskm::UtilityState state = rawlskm::evaluate(ds, assignment);
    if (!rawlskm::generate_r1(ds, state, assignment).empty()) {
      return ClimbableStart{std::move(ds), std::move(assignment)};
    }
  }
  throw std::runtime_error("make_climbable: no improvable start found");
}

}  // namespace

TEST_CASE("operator names parse both cases") {
  CHECK(rawlskm::parse_operator_kind("r1") == rawlskm::OperatorKind::r1);
  CHECK(rawlskm::parse_operator_kind("R1") == rawlskm::OperatorKind::r1);
  CHECK(rawlskm::parse_operator_kind("r2") == rawlskm::OperatorKind::r2);
  CHECK(rawlskm::parse_operator_kind("R2") == rawlskm::OperatorKind::r2);
  CHECK_THROWS(rawlskm::parse_operator_kind("r3"));
  CHECK(std::string(rawlskm::to_string(rawlskm::TerminationReason::null_op)) == "null-op");
  CHECK(std::string(rawlskm::to_string(rawlskm::TerminationReason::iteration_cap)) ==
        "iteration-cap");
}

TEST_CASE("single-move traversal climbs monotonically and replays exactly") {
  const ClimbableStart start = make_climbable(81, 30, 3);
  const rawlskm::TraverseResult result = rawlskm::traverse(start.dataset, start.assignment);

  REQUIRE_FALSE(result.trajectory.steps.empty());
  CHECK(result.trajectory.reason == rawlskm::TerminationReason::null_op);

  // The recorded start is the evaluated start.
  const rawlskm::UtilityState start_state = rawlskm::evaluate(start.dataset, start.assignment);
  CHECK(result.trajectory.start.lag_utility == start_state.point.lag_utility);
  CHECK(result.trajectory.start.overall == start_state.point.overall);

  // Strict lag ascent, 1-based iteration numbers, no null branches inside.
  double lag = result.trajectory.start.lag_utility;
  for (std::size_t i = 0; i < result.trajectory.steps.size(); ++i) {
    const rawlskm::TrajectoryStep& step = result.trajectory.steps[i];
    CHECK(step.iteration == i + 1);
    CHECK(step.point.lag_utility > lag);
    lag = step.point.lag_utility;
    CHECK(step.branch != rawlskm::SelectionBranch::null_op);
    CHECK(step.op.size == 1);
  }

  // Replaying the ops from the start reproduces the final assignment and
  // every recorded point.
  rawlskm::ClusterAssignment replay = start.assignment;
  for (const rawlskm::TrajectoryStep& step : result.trajectory.steps) {
    replay = rawlskm::apply(start.dataset, replay, step.op);
    const rawlskm::UtilityPoint fresh = rawlskm::evaluate(start.dataset, replay).point;
    CHECK(step.point.lag_utility == fresh.lag_utility);
    CHECK(step.point.mag_utility == fresh.mag_utility);
    CHECK(step.point.overall == fresh.overall);
  }
  CHECK(replay.labels == result.final_assignment.labels);

  // Termination is honest: no strictly lag-raising single move remains.
  CHECK(testsupport::brute_force_r1(start.dataset, result.final_assignment).empty());
}

TEST_CASE("the first step agrees with the selection policy") {
  const ClimbableStart start = make_climbable(83, 24, 3);
  const rawlskm::UtilityState state = rawlskm::evaluate(start.dataset, start.assignment);
  const auto candidates = rawlskm::generate_r1(start.dataset, state, start.assignment);
  REQUIRE_FALSE(candidates.empty());

  std::vector<rawlskm::UtilityPoint> points;
  for (const auto& c : candidates) points.push_back(c.point);
  const rawlskm::Selection sel = rawlskm::select_best(state.point, points);
  REQUIRE(sel.chosen);

  const rawlskm::TraverseResult result = rawlskm::traverse(start.dataset, start.assignment);
  REQUIRE_FALSE(result.trajectory.steps.empty());
  CHECK(result.trajectory.steps[0].op == candidates[*sel.chosen].op);
  CHECK(result.trajectory.steps[0].branch == sel.branch);
}

TEST_CASE("the iteration cap cuts the walk short") {
  const ClimbableStart start = make_climbable(85, 30, 3);
  rawlskm::TraverseConfig config;
  config.iteration_cap = 1;
  const rawlskm::TraverseResult result =
      rawlskm::traverse(start.dataset, start.assignment, config);
  CHECK(result.trajectory.steps.size() == 1);
  CHECK(result.trajectory.reason == rawlskm::TerminationReason::iteration_cap);
}

TEST_CASE("an already-stable start terminates with no steps") {
  const rawlskm::Dataset ds = testsupport::make_t1();
  rawlskm::ClusterAssignment optimal;
  optimal.k = 2;
  optimal.labels = {0, 0, 1, 1};
  auto [centroids, sizes] = rawlskm::recompute_centroids(ds, optimal.labels, 2);
  optimal.centroids = std::move(centroids);
  optimal.cluster_sizes = std::move(sizes);

  REQUIRE(testsupport::brute_force_r1(ds, optimal).empty());
  const rawlskm::TraverseResult result = rawlskm::traverse(ds, optimal);
  CHECK(result.trajectory.steps.empty());
  CHECK(result.trajectory.reason == rawlskm::TerminationReason::null_op);
  CHECK(result.final_assignment.labels == optimal.labels);
}

TEST_CASE("traversal is schedule independent") {
  const ClimbableStart start = make_climbable(87, 40, 4);
  rawlskm::TraverseConfig serial;
  serial.threads = 1;
  rawlskm::TraverseConfig threaded;
  threaded.threads = 3;

  const rawlskm::TraverseResult a = rawlskm::traverse(start.dataset, start.assignment, serial);
  const rawlskm::TraverseResult b =
      rawlskm::traverse(start.dataset, start.assignment, threaded);
  REQUIRE(a.trajectory.steps.size() == b.trajectory.steps.size());
  for (std::size_t i = 0; i < a.trajectory.steps.size(); ++i) {
    CHECK(a.trajectory.steps[i].op == b.trajectory.steps[i].op);
    CHECK(a.trajectory.steps[i].point.lag_utility == b.trajectory.steps[i].point.lag_utility);
    CHECK(a.trajectory.steps[i].point.overall == b.trajectory.steps[i].point.overall);
    CHECK(a.trajectory.steps[i].branch == b.trajectory.steps[i].branch);
  }
  CHECK(a.final_assignment.labels == b.final_assignment.labels);
}

TEST_CASE("pair traversal climbs with two-example ops") {
  const ClimbableStart start = make_climbable(89, 16, 3);
  rawlskm::TraverseConfig config;
  config.op_kind = rawlskm::OperatorKind::r2;
  config.prune.p_pct = 100.0;
  config.prune.q_pct = 100.0;
  const rawlskm::TraverseResult result =
      rawlskm::traverse(start.dataset, start.assignment, config);

  double lag = result.trajectory.start.lag_utility;
  for (const rawlskm::TrajectoryStep& step : result.trajectory.steps) {
    CHECK(step.point.lag_utility > lag);
    lag = step.point.lag_utility;
    CHECK(step.op.size == 2);
    CHECK(step.op.moves[0].example_id < step.op.moves[1].example_id);
  }
  CHECK(result.trajectory.reason == rawlskm::TerminationReason::null_op);

  // Termination is honest for pairs too.
  CHECK(testsupport::brute_force_r2_unpruned(start.dataset, result.final_assignment).empty());

  // Pinned semantics also walk upward in their tracked group.
  rawlskm::TraverseConfig pinned = config;
  pinned.op_kind = rawlskm::OperatorKind::r1;
  pinned.semantics = rawlskm::LagSemantics::pinned(0);
  const rawlskm::TraverseResult pinned_result =
      rawlskm::traverse(start.dataset, start.assignment, pinned);
  double u0 = pinned_result.trajectory.start.group_utility[0];
  for (const rawlskm::TrajectoryStep& step : pinned_result.trajectory.steps) {
    CHECK(step.point.group_utility[0] > u0);
    u0 = step.point.group_utility[0];
  }
}
