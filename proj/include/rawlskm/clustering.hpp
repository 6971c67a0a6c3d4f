#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rawlskm/dataset.hpp"
#include "rawlskm/random.hpp"

namespace rawlskm {

/// Squared Euclidean distance. This is the distance used everywhere in the
/// library: it is the k-means objective's native metric and the one under
/// which the encoding's per-attribute bound of 1 (and delta = attribute
/// count) holds.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::logic_error("squared_distance: length mismatch (" +
                           std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

struct ClusterAssignment {
  std::vector<int> labels;                    // per example, in 0..k-1
  int k = 0;
  std::vector<std::vector<double>> centroids; // k vectors of length F
  std::vector<int> cluster_sizes;             // k counts, all positive
};

/// Exact from-scratch centroid recomputation. Every cluster must be
/// nonempty; callers that perturb labels are responsible for never emptying
/// one.
inline std::pair<std::vector<std::vector<double>>, std::vector<int>> recompute_centroids(
    const Dataset& dataset, const std::vector<int>& labels, int k) {
  if (labels.size() != dataset.size()) {
    throw std::invalid_argument("recompute_centroids: labels/dataset size mismatch");
  }
  std::vector<std::vector<double>> centroids(
      static_cast<std::size_t>(k),
      std::vector<double>(static_cast<std::size_t>(dataset.feature_count), 0.0));
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= k) throw std::invalid_argument("recompute_centroids: label out of range");
    const auto& feat = dataset.examples[i].features;
    auto& acc = centroids[static_cast<std::size_t>(c)];
    for (std::size_t j = 0; j < feat.size(); ++j) acc[j] += feat[j];
    ++sizes[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0) {
      throw std::runtime_error("recompute_centroids: cluster " + std::to_string(c) +
                               " is empty");
    }
    for (auto& v : centroids[static_cast<std::size_t>(c)]) {
      v /= sizes[static_cast<std::size_t>(c)];
    }
  }
  return {std::move(centroids), std::move(sizes)};
}

enum class InitMethod { random_examples, kmeans_plus_plus };

struct KMeansConfig {
  int max_iters = 300;
  InitMethod init = InitMethod::random_examples;
};

struct KMeansResult {
  ClusterAssignment assignment;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;               // exact label fixpoint reached
  std::vector<double> objective_trace;  // objective after each iteration
};

inline const char* to_string(InitMethod m) {
  return m == InitMethod::random_examples ? "random-examples" : "kmeans++";
}

namespace detail {

inline std::vector<std::vector<double>> init_centroids(const Dataset& dataset, int k,
                                                       Rng& rng, InitMethod method) {
  const std::size_t n = dataset.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  if (method == InitMethod::random_examples) {
    const auto picks = sample_without_replacement(rng, n, static_cast<std::size_t>(k));
    for (const std::size_t i : picks) centroids.push_back(dataset.examples[i].features);
    return centroids;
  }
  // kmeans++: first centroid uniform, then distance-squared weighted draws.
  centroids.push_back(dataset.examples[uniform_below(rng, n)].features);
  std::vector<double> dist(n, std::numeric_limits<double>::max());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(dataset.examples[i].features,
                                                   centroids.back()));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      const double target = uniform_unit(rng) * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = uniform_below(rng, n);
    }
    centroids.push_back(dataset.examples[pick].features);
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's algorithm from seeded initial centroids. Iterates until an exact
/// label fixpoint or max_iters. Assignment ties go to the lowest cluster
/// index. A cluster that comes out empty after an assignment pass is
/// reseeded to the example currently farthest from its own centroid (ties to
/// the lowest example id), which keeps k constant without breaking the
/// objective's monotone descent: the empty cluster contributes nothing, and
/// every later reassignment still only lowers per-example distance.
inline KMeansResult kmeans(const Dataset& dataset, int k, std::uint64_t seed,
                           const KMeansConfig& config = {}) {
  const std::size_t n = dataset.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("kmeans: need 1 <= k <= n");
  }
  if (config.max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

  Rng rng(seed);
  auto centroids = detail::init_centroids(dataset, k, rng, config.init);

  KMeansResult result;
  result.seed = seed;
  std::vector<int> labels(n, -1);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);

  for (int iter = 0; iter < config.max_iters; ++iter) {
    // Assignment pass.
    bool changed = false;
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& feat = dataset.examples[i].features;
      int best = 0;
      double best_d = squared_distance(feat, centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(feat, centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
      ++sizes[static_cast<std::size_t>(best)];
    }
    if (!changed) {
      result.converged = true;
      break;
    }
    ++result.iterations;

    // Centroid update.
    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& feat = dataset.examples[i].features;
      auto& acc = centroids[static_cast<std::size_t>(labels[i])];
      for (std::size_t j = 0; j < feat.size(); ++j) acc[j] += feat[j];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        for (auto& v : centroids[static_cast<std::size_t>(c)]) {
          v /= sizes[static_cast<std::size_t>(c)];
        }
      }
    }

    // Empty-cluster repair: reseed to the farthest example, one per empty
    // cluster, distinct examples.
    std::vector<int> empties;
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) empties.push_back(c);
    }
    if (!empties.empty()) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = squared_distance(dataset.examples[i].features,
                                centroids[static_cast<std::size_t>(labels[i])]);
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
      std::size_t next = 0;
      for (const int c : empties) {
        centroids[static_cast<std::size_t>(c)] =
            dataset.examples[order[next++]].features;
      }
    }

    // Objective after this iteration (against the just-updated centroids).
    double objective = 0, comp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double term = squared_distance(dataset.examples[i].features,
                                           centroids[static_cast<std::size_t>(labels[i])]) -
                          comp;
      const double total = objective + term;
      comp = (total - objective) - term;
      objective = total;
    }
    result.objective_trace.push_back(objective);
  }

  // Hard repair for the degenerate endings the soft reseed cannot reach
  // (duplicate feature vectors, or max_iters landing right after a reseed):
  // move one member out of the largest cluster into each still-empty cluster
  // so the returned assignment always has k nonempty clusters.
  {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (const int c : labels) ++sizes[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
      while (sizes[static_cast<std::size_t>(c)] == 0) {
        int donor = 0;
        for (int d = 1; d < k; ++d) {
          if (sizes[static_cast<std::size_t>(d)] > sizes[static_cast<std::size_t>(donor)]) {
            donor = d;
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (labels[i] == donor) {
            labels[i] = c;
            --sizes[static_cast<std::size_t>(donor)];
            ++sizes[static_cast<std::size_t>(c)];
            break;
          }
        }
      }
    }
  }

  auto [final_centroids, final_sizes] = recompute_centroids(dataset, labels, k);
  result.assignment.labels = std::move(labels);
  result.assignment.k = k;
  result.assignment.centroids = std::move(final_centroids);
  result.assignment.cluster_sizes = std::move(final_sizes);
  return result;
}

}  // namespace rawlskm
