#pragma once

#include <cstdint>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/random.hpp"

namespace testsupport {

/// Four points on a line, two per group. Optimal 2-clustering is
/// {x0, x1 | x2, x3} with centroids {0.1, 0.8} and SSE 0.10.
inline rawlskm::Dataset make_t1() {
  return rawlskm::make_tiny_instance({{0.0}, {0.2}, {0.6}, {1.0}}, {0, 0, 1, 1});
}

/// Random dataset with features uniform in [0, 1] and a roughly 30/70
/// group split. Generic position: no coordinate collisions in practice.
inline rawlskm::Dataset random_instance(rawlskm::Rng& rng, std::size_t n, int feature_count) {
  std::vector<std::vector<double>> features(n);
  std::vector<int> groups(n);
  bool saw[2] = {false, false};
  for (std::size_t i = 0; i < n; ++i) {
    features[i].resize(static_cast<std::size_t>(feature_count));
    for (auto& v : features[i]) v = rawlskm::uniform_unit(rng);
    groups[i] = rawlskm::uniform_unit(rng) < 0.3 ? 0 : 1;
    saw[groups[i]] = true;
  }
  // Both groups must be inhabited for lag/mag to be informative.
  if (n >= 2) {
    if (!saw[0]) groups[0] = 0;
    if (!saw[1]) groups[1] = 1;
  }
  return rawlskm::make_tiny_instance(features, groups, feature_count);
}

/// Random valid assignment: every cluster gets one distinct anchor example,
/// the rest are labeled uniformly. Centroids and sizes are exact.
inline rawlskm::ClusterAssignment random_assignment(rawlskm::Rng& rng,
                                                    const rawlskm::Dataset& dataset, int k) {
  const std::size_t n = dataset.size();
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rawlskm::uniform_below(rng, static_cast<std::uint64_t>(k)));
  const auto anchors =
      rawlskm::sample_without_replacement(rng, n, static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) labels[anchors[static_cast<std::size_t>(c)]] = c;
  rawlskm::ClusterAssignment a;
  a.k = k;
  a.labels = std::move(labels);
  auto [centroids, sizes] = rawlskm::recompute_centroids(dataset, a.labels, k);
  a.centroids = std::move(centroids);
  a.cluster_sizes = std::move(sizes);
  return a;
}

}  // namespace testsupport
